//! Closed-form and independent-method checks with frozen values.

use std::f64::consts::PI;

use fk_kam::lindstedt::{check_symmetry, solve_eta_family};
use fk_kam::model::{eval_potential_terms, equilibrium_residual};
use fk_kam::oracle::{dense_twisted_solve, ModeBasis};
use fk_kam::solver::{apply_chain, solve_chain, Case, FactorData};
use fk_kam::twisted::{factor_coefficient, solve_constant_twisted, solve_twisted, Orientation, TwistedOperator};
use fk_kam::{
    diophantine_constant, evaluate_series, expand_series, run_kam, solve_constant_cohomology, Frequency, Grid,
    KamError, KamOptions, ModelConfig, Potential, SolverState, SpectralField,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn golden() -> Frequency {
    diophantine_constant(&[(5f64.sqrt() - 1.0) / 2.0], 1.0, 200).unwrap()
}

fn g64() -> Grid {
    Grid::new(1, 64).unwrap()
}

fn cos_model(mu: f64) -> ModelConfig {
    ModelConfig::new(golden(), vec![1.0, 0.5], 0.0, Potential::cosine(2, 0, mu).unwrap()).unwrap()
}

fn close(z: Complex64, re: f64, im: f64, tol: f64) -> bool {
    (z - Complex64::new(re, im)).norm() < tol
}

#[test]
fn golden_mean_kappa_is_attained_at_first_mode() {
    let f = golden();
    assert!((f.kappa_hat - 0.381_966_011_250_105_1).abs() < 1e-12);
    assert_eq!(f.minimizer, (vec![1], 1));
}

#[test]
fn half_is_resonant_at_two() {
    match diophantine_constant(&[0.5], 1.0, 10) {
        Err(KamError::ResonanceDetected { k, m, .. }) => assert_eq!((k, m), (vec![2], 1)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn cosine_cohomology_closed_form() {
    let phi = SpectralField::from_fn(g64(), |p| (2.0 * PI * p[0]).cos());
    let v = solve_constant_cohomology(&phi, &golden()).unwrap();
    assert!(close(v.coefficient(&[1]), -0.25, 0.097_200_183_390_051_61, 1e-14));
}

#[test]
fn constant_twisted_single_mode() {
    let rhs = SpectralField::from_fn(g64(), |p| 2.0 * (2.0 * PI * p[0]).cos());
    let m = solve_constant_twisted(2.0, 1.0, &rhs, &golden()).unwrap();
    assert!(close(m.coefficient(&[1]), -0.311_308_306_104_398_2, 0.169_945_877_112_327_25, 1e-14));
}

#[test]
fn constant_twisted_matches_geometric_series() {
    // 2 m_+ - m = r  =>  m = sum_n 2^{-n-1} r(. - (n+1) Omega)
    let f = golden();
    let r = SpectralField::from_fn(g64(), |p| {
        0.3 + (2.0 * PI * p[0]).sin() + 0.2 * (6.0 * PI * p[0]).cos()
    });
    let m = solve_constant_twisted(2.0, 1.0, &r, &f).unwrap();
    let mut series = SpectralField::zeros(g64());
    for n in 0..60 {
        let shift = [-((n + 1) as f64) * f.omega[0]];
        series = series.axpy(0.5f64.powi(n + 1), &r.translate(&shift)).unwrap();
    }
    assert!(m.distance(&series).unwrap() < 1e-12);
}

#[test]
fn unequal_average_lambda_slope() {
    // d<m>/dlambda = <gamma_a (gamma_b)_+> / (a_bar - b_bar) with w = 1
    let f = golden();
    let a = SpectralField::from_fn(g64(), |p| (0.05 + 0.1 * (2.0 * PI * p[0]).cos()).exp());
    let b = SpectralField::constant(g64(), 1.0);
    let phi = SpectralField::from_fn(g64(), |p| (2.0 * PI * p[0]).sin());
    let fa = factor_coefficient(&a, &f, Orientation::Forward).unwrap();
    let fb = factor_coefficient(&b, &f, Orientation::Backward).unwrap();
    let weight = fa.gamma.pointwise_mul(&fb.gamma.translate(&f.omega)).unwrap();
    let mean_m = |lambda: f64| {
        let r = phi.add_scalar(lambda).pointwise_mul(&weight).unwrap();
        solve_constant_twisted(fa.avg_coeff, fb.avg_coeff, &r, &f).unwrap().average()
    };
    let slope = (mean_m(0.5) - mean_m(-0.5)) / 1.0;
    let formula = weight.average() / (fa.avg_coeff - fb.avg_coeff);
    assert!((slope - formula).abs() < 1e-8 * formula.abs());
    // The factored unknown solves the original equation.
    let v = fk_kam::twisted::solve_twisted(&a, &b, &phi, &b, &f).unwrap();
    let res = fk_kam::twisted::apply_twisted(&a, &b, &v.v, &f)
        .unwrap()
        .sub(&phi.add_scalar(v.lambda))
        .unwrap();
    assert!(res.sup_norm() < 1e-13);
}

#[test]
fn twisted_matches_dense_solve() {
    let f = golden();
    let a = SpectralField::from_fn(g64(), |p| 1.3 + 0.2 * (2.0 * PI * p[0]).cos());
    let b = SpectralField::from_fn(g64(), |p| 1.0 + 0.1 * (2.0 * PI * p[0]).sin());
    let w = SpectralField::from_fn(g64(), |p| 1.0 + 0.3 * (4.0 * PI * p[0]).cos());
    let phi = SpectralField::from_fn(g64(), |p| (2.0 * PI * p[0]).sin() + 0.1);
    let fast = solve_twisted(&a, &b, &phi, &w, &f).unwrap();
    let (lambda, v) = dense_twisted_solve(&a, &b, &phi, &w, &f, 21).unwrap();
    assert!((fast.lambda - lambda).abs() < 1e-8 * lambda.abs().max(1.0));
    assert!(fast.v.distance(&v).unwrap() < 1e-8 * v.sup_norm().max(1.0));
}

#[test]
fn exp_log_pair_and_strip_bound() {
    let g = SpectralField::from_fn(g64(), |p| 0.1 * (2.0 * PI * p[0]).cos());
    assert!(g.exp_field().log_field().unwrap().distance(&g).unwrap() < 1e-11);
    // exact coefficients: sampled roundoff would be amplified by e^{2 pi |k| rho}
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 64];
    coeffs[g64().mode_index(&[1]).unwrap()] = Complex64::new(0.5, 0.0);
    coeffs[g64().mode_index(&[-1]).unwrap()] = Complex64::new(0.5, 0.0);
    let c = SpectralField::from_coefficients(g64(), coeffs).unwrap();
    assert!((c.analytic_norm_bound(0.1).bound - 1.874_456_087_585_338_2).abs() < 1e-12);
}

#[test]
fn lindstedt_first_order_divisor() {
    // L v1 = -W  =>  v1_1 = -(1/2) / (2 cos(2 pi Omega) - 2)
    let series = expand_series(&cos_model(1.0), g64(), 1).unwrap();
    assert!(close(series.v_coeffs[1].coefficient(&[1]), 0.143_895_751_302_119_35, 0.0, 1e-13));
    assert!(series.lambda_coeffs[1].abs() < 1e-15);
    assert!(series.sigma_coeffs[1].abs() < 1e-15);
}

#[test]
fn series_start_converges_in_two_steps() {
    let cfg = cos_model(1.0);
    let series = expand_series(&cfg, g64(), 3).unwrap();
    let guess = evaluate_series(&series, 0.05);
    let run = run_kam(&cfg.scaled(0.05), &guess, &KamOptions::default()).unwrap();
    assert!(run.iterations() <= 2, "{} iterations", run.iterations());
}

#[test]
fn potential_derivatives_match_finite_differences() {
    let p = Potential::new(
        2,
        vec![
            fk_kam::model::PotentialMode { j: vec![1, 0], amp: Complex64::new(0.02, 0.01) },
            fk_kam::model::PotentialMode { j: vec![2, -1], amp: Complex64::new(0.005, 0.0) },
        ],
    )
    .unwrap();
    let cfg = cos_model(0.0).with_potential(p).with_eta(0.3);
    let v = SpectralField::from_fn(g64(), |x| 0.05 * (2.0 * PI * x[0]).sin());
    let h = 1e-5;
    let at = |s: f64| eval_potential_terms(&v.add_scalar(s), &cfg).unwrap();
    let (t, tp, tm) = (at(0.0), at(h), at(-h));
    let dw = tp.w.sub(&tm.w).unwrap().scale(0.5 / h);
    let ddw = tp.dw.sub(&tm.dw).unwrap().scale(0.5 / h);
    assert!(dw.distance(&t.dw).unwrap() < 1e-8);
    assert!(ddw.distance(&t.ddw).unwrap() < 1e-7);
}

#[test]
fn residual_is_periodic_in_eta_and_affine_in_counterterms() {
    let p = Potential::new(
        2,
        vec![fk_kam::model::PotentialMode { j: vec![1, 1], amp: Complex64::new(0.02, 0.0) }],
    )
    .unwrap();
    let cfg = cos_model(0.0).with_potential(p);
    let s = SolverState {
        v: SpectralField::from_fn(g64(), |x| 0.03 * (2.0 * PI * x[0]).cos()),
        sigma: 0.0,
        lambda: 0.0,
        c: SpectralField::constant(g64(), 1.0),
    };
    let e0 = equilibrium_residual(&s, &cfg.with_eta(0.2)).unwrap();
    let e1 = equilibrium_residual(&s, &cfg.with_eta(1.2)).unwrap();
    assert!(e0.distance(&e1).unwrap() < 1e-13);
    let mut t = s.clone();
    t.sigma = 0.7;
    t.lambda = -0.4;
    let et = equilibrium_residual(&t, &cfg.with_eta(0.2)).unwrap();
    let expect = e0.axpy(0.7, &s.v).unwrap().add_scalar(-0.4);
    assert!(et.distance(&expect).unwrap() < 1e-14);
}

#[test]
fn symmetry_with_zero_iota_is_identity() {
    let cfg = cos_model(0.05);
    let family: Vec<SolverState> = solve_eta_family(&cfg, &SolverState::trivial(g64()), 8, &KamOptions::default())
        .unwrap()
        .into_iter()
        .map(|r| r.state)
        .collect();
    let rep = check_symmetry(&family, &cfg, 0.0).unwrap();
    for (s, t) in family.iter().zip(&rep.transformed) {
        assert!(s.v.distance(&t.v).unwrap() < 1e-14);
        assert_eq!(s.lambda, t.lambda);
    }
    // lambda~ = lambda(eta + iota beta_eta) - iota sigma(eta + iota beta_eta);
    // the cosine family does not depend on eta.
    let rep = check_symmetry(&family, &cfg, 0.01).unwrap();
    let expect = family[0].lambda - 0.01 * family[0].sigma;
    assert!((rep.transformed[3].lambda - expect).abs() < 1e-12);
}

/// Chain factors with independent coefficients, so every average case is
/// reachable.
fn chain_factors(a: &SpectralField, c_plus: &SpectralField) -> FactorData {
    let one = SpectralField::constant(a.grid(), 1.0);
    FactorData {
        a: a.clone(),
        c_plus: c_plus.clone(),
        plus: TwistedOperator::new(a, &one, &golden()).unwrap(),
        minus: TwistedOperator::new(c_plus, &one, &golden()).unwrap(),
    }
}

fn dense_chain(factors: &FactorData, rhs: &SpectralField, cutoff: i64) -> (SpectralField, f64) {
    let basis = ModeBasis::new(rhs.grid(), cutoff).unwrap();
    let n = basis.len();
    let op = basis.matrix(|x| apply_chain(factors, x, &golden())).unwrap();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&op);
    m[(0, n)] = 1.0;
    m[(n, 0)] = 1.0;
    let mut b = DVector::zeros(n + 1);
    b.rows_mut(0, n).copy_from(&basis.project(rhs));
    let x = m.lu().solve(&b).unwrap();
    (basis.field(&x.as_slice()[..n]).unwrap(), x[n])
}

#[test]
fn chain_matches_dense_solve_in_every_case() {
    let osc = |amp: f64, phase: f64| {
        SpectralField::from_fn(g64(), move |p| (amp * (2.0 * PI * p[0] + phase).cos()).exp())
    };
    let rhs = SpectralField::from_fn(g64(), |p| 0.2 + (2.0 * PI * p[0]).sin() + 0.3 * (4.0 * PI * p[0]).cos());
    let cases = [
        (osc(0.1, 0.0).scale(1.2), osc(0.05, 1.0).scale(0.9), Case::A),
        (osc(0.1, 0.0), osc(0.05, 1.0).scale(0.9), Case::B),
        (osc(0.1, 0.0).scale(1.2), osc(0.05, 1.0), Case::C),
        (osc(0.1, 0.0), osc(0.05, 1.0), Case::D),
    ];
    for (a, c_plus, case) in cases {
        let factors = chain_factors(&a, &c_plus);
        let fast = solve_chain(&factors, &rhs, &golden()).unwrap();
        assert_eq!(fast.case, case);
        let (x, g) = dense_chain(&factors, &rhs, 21);
        assert!(fast.x.distance(&x).unwrap() < 1e-8 * x.sup_norm().max(1.0), "{case}");
        assert!((fast.g - g).abs() < 1e-8 * g.abs().max(1.0), "{case}");
        let back = apply_chain(&factors, &fast.x, &golden()).unwrap().add_scalar(fast.g);
        assert!(back.distance(&rhs).unwrap() < 1e-12, "{case}");
    }
}
