//! Perturbative (Lindstedt) expansions in `mu` for the family `mu W`, and
//! the eta-symmetry check of solution families.
//!
//! The order-n coefficients solve the linearized system at the base point
//! with right-hand sides given by the order-n parts of `E` and `F` evaluated
//! with the order-n unknowns set to zero.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{KamError, Result};
use crate::field::{Grid, SpectralField};
use crate::model::{eval_potential_terms, ModelConfig, SolverState};
use crate::solver::{
    build_factors, linear_solve_with, run_kam, solve_chain, Evaluation, KamOptions, KamRun,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesKind {
    /// Equilibrium and factorization equations together.
    Pair,
    /// Equilibrium equation alone with `sigma` held at its base value.
    EquilibriumOnly,
}

#[derive(Clone, Debug)]
pub struct PerturbativeSeries {
    pub mu0: f64,
    pub kind: SeriesKind,
    /// Entry 0 of every list is the base point.
    pub v_coeffs: Vec<SpectralField>,
    pub c_coeffs: Vec<SpectralField>,
    pub sigma_coeffs: Vec<f64>,
    pub lambda_coeffs: Vec<f64>,
    /// Every `v^n`, `n >= 1`, has zero mean.
    pub normalized: bool,
}

impl PerturbativeSeries {
    pub fn order(&self) -> usize {
        self.v_coeffs.len() - 1
    }

    pub fn base_point(&self) -> SolverState {
        SolverState {
            v: self.v_coeffs[0].clone(),
            sigma: self.sigma_coeffs[0],
            lambda: self.lambda_coeffs[0],
            c: self.c_coeffs[0].clone(),
        }
    }

    /// The series cut at order `n`.
    pub fn truncated(&self, n: usize) -> Self {
        let k = n.min(self.order()) + 1;
        Self {
            mu0: self.mu0,
            kind: self.kind,
            v_coeffs: self.v_coeffs[..k].to_vec(),
            c_coeffs: self.c_coeffs[..k].to_vec(),
            sigma_coeffs: self.sigma_coeffs[..k].to_vec(),
            lambda_coeffs: self.lambda_coeffs[..k].to_vec(),
            normalized: self.normalized,
        }
    }
}

/// Options for [`expand_series_around`].
#[derive(Clone, Debug)]
pub struct SeriesOptions {
    pub kind: SeriesKind,
    /// Largest admitted ratio of successive coefficient norms.
    pub growth_bound: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            kind: SeriesKind::Pair,
            growth_bound: 1e6,
        }
    }
}

/// Taylor coefficients in `delta` of `W`, `d_beta W` composed with
/// `(psi, eta) + beta v(delta)`, up to order `upto`.
struct ComposedSeries {
    w: Vec<SpectralField>,
    dw: Vec<SpectralField>,
}

fn compose_series(v: &[SpectralField], config: &ModelConfig, upto: usize) -> Result<ComposedSeries> {
    let grid = v[0].grid();
    let fine_size = grid.size * config.oversample.next_power_of_two();
    let fine = Grid::new(grid.dim, fine_size)?;
    let vals: Vec<Vec<f64>> = v
        .iter()
        .take(upto + 1)
        .map(|f| f.resample(fine_size).map(|g| g.values().to_vec()))
        .collect::<Result<_>>()?;
    let zero = Complex64::new(0.0, 0.0);
    let mut w = vec![vec![zero; fine.len()]; upto + 1];
    let mut dw = vec![vec![zero; fine.len()]; upto + 1];
    let dim = config.dim();
    let points: Vec<Vec<f64>> = (0..fine.len()).map(|i| fine.point(i)).collect();
    for m in config.potential.modes() {
        let s = Complex64::new(0.0, 2.0 * PI * m.j.iter().zip(&config.beta).map(|(&j, b)| j as f64 * b).sum::<f64>());
        let eta_phase = m.j[dim] as f64 * config.eta;
        for (i, p) in points.iter().enumerate() {
            let base: f64 = m.j[..dim].iter().zip(p).map(|(&j, x)| j as f64 * x).sum();
            let phase = m.amp * Complex64::from_polar(1.0, 2.0 * PI * (base + eta_phase));
            // E_0 = exp(s v^0), E_n = (s/n) sum_k k v^k E_{n-k}
            let mut e = Vec::with_capacity(upto + 1);
            e.push((s * vals[0][i]).exp());
            for n in 1..=upto {
                let mut acc = zero;
                for k in 1..=n.min(vals.len() - 1) {
                    acc += e[n - k] * (k as f64 * vals[k][i]);
                }
                e.push(acc * s / n as f64);
            }
            for n in 0..=upto {
                let t = phase * e[n];
                w[n][i] += t;
                dw[n][i] += t * s;
            }
        }
    }
    let finish = |data: Vec<Vec<Complex64>>| -> Result<Vec<SpectralField>> {
        data.iter()
            .map(|d| {
                SpectralField::from_complex_grid(fine, d)?
                    .resample(grid.size)
                    .map(|f| f.dealias())
            })
            .collect()
    };
    Ok(ComposedSeries {
        w: finish(w)?,
        dw: finish(dw)?,
    })
}

/// Order-`n` parts of `E` and `F` for the family `mu W` around `mu0`, with
/// the entries at index `n` taken as zero.
fn order_residuals(
    v: &[SpectralField],
    c: &[SpectralField],
    sigma: &[f64],
    lambda: &[f64],
    n: usize,
    mu0: f64,
    config: &ModelConfig,
) -> Result<(SpectralField, SpectralField)> {
    let grid = v[0].grid();
    let zero = SpectralField::zeros(grid);
    let at = |list: &[SpectralField], i: usize| if i < n { list[i].clone() } else { zero.clone() };
    let scalar = |list: &[f64], i: usize| if i < n { list[i] } else { 0.0 };
    let vs: Vec<SpectralField> = (0..=n).map(|i| at(v, i)).collect();
    let comp = compose_series(&vs, config, n)?;
    // [mu X]_m = mu0 X_m + X_{m-1}
    let family = |x: &[SpectralField], m: usize| -> Result<SpectralField> {
        let head = x[m].scale(mu0);
        if m == 0 {
            Ok(head)
        } else {
            head.add(&x[m - 1])
        }
    };
    let mut e = family(&comp.w, n)?.add_scalar(scalar(lambda, n));
    for i in 0..=n {
        e = e.axpy(scalar(sigma, i), &vs[n - i])?;
    }
    let mut f = SpectralField::zeros(grid);
    for i in 0..=n {
        let mut p = at(c, i).scale(-1.0).sub(&family(&comp.dw, i)?)?.add_scalar(-scalar(sigma, i));
        if i == 0 {
            p = p.add_scalar(2.0);
        }
        let cp = at(c, n - i).translate(&config.freq.omega);
        f = f.add(&p.pointwise_mul(&cp)?)?;
    }
    Ok((e, f))
}

/// Lindstedt series of order `order` for the family `mu W` around the
/// trivial solution at `mu = 0`.
pub fn expand_series(config: &ModelConfig, grid: Grid, order: usize) -> Result<PerturbativeSeries> {
    expand_series_around(config, &SolverState::trivial(grid), 0.0, order, &SeriesOptions::default())
}

/// Series around a base point solving both equations for `mu0 W`.
pub fn expand_series_around(
    config: &ModelConfig,
    base: &SolverState,
    mu0: f64,
    order: usize,
    options: &SeriesOptions,
) -> Result<PerturbativeSeries> {
    let freq = &config.freq;
    let base_config = config.scaled(mu0);
    let terms = eval_potential_terms(&base.v, &base_config)?;
    let factors = build_factors(base, freq)?;
    let mut series = PerturbativeSeries {
        mu0,
        kind: options.kind,
        v_coeffs: vec![base.v.clone()],
        c_coeffs: vec![base.c.clone()],
        sigma_coeffs: vec![base.sigma],
        lambda_coeffs: vec![base.lambda],
        normalized: true,
    };
    let mut last_norm = 0.0;
    for n in 1..=order {
        let (e, f) = order_residuals(
            &series.v_coeffs,
            &series.c_coeffs,
            &series.sigma_coeffs,
            &series.lambda_coeffs,
            n,
            mu0,
            config,
        )?;
        let (vn, cn, sn, ln) = match options.kind {
            SeriesKind::Pair => {
                let up = linear_solve_with(base, &terms, &factors, &e, &f, freq)?;
                (up.v_hat, up.c_hat, up.sigma_hat, up.lambda_hat)
            }
            SeriesKind::EquilibriumOnly => {
                let sol = solve_chain(&factors, &e.scale(-1.0), freq)?;
                (sol.x, SpectralField::zeros(base.grid()), 0.0, sol.g)
            }
        };
        let norm = vn.sup_norm().max(cn.sup_norm()).max(sn.abs()).max(ln.abs());
        if n > 1 && last_norm > 0.0 && norm / last_norm > options.growth_bound {
            return Err(KamError::SeriesDivergence {
                order: n,
                ratio: norm / last_norm,
            });
        }
        if !norm.is_finite() {
            return Err(KamError::SeriesDivergence {
                order: n,
                ratio: f64::INFINITY,
            });
        }
        last_norm = norm;
        series.v_coeffs.push(vn);
        series.c_coeffs.push(cn);
        series.sigma_coeffs.push(sn);
        series.lambda_coeffs.push(ln);
    }
    Ok(series)
}

/// Partial sum at `mu`, by Horner's rule in `mu - mu0`.
pub fn evaluate_series(series: &PerturbativeSeries, mu: f64) -> SolverState {
    let d = mu - series.mu0;
    let horner_f = |coeffs: &[SpectralField]| {
        let mut acc = coeffs.last().unwrap().clone();
        for c in coeffs.iter().rev().skip(1) {
            acc = acc.scale(d).add(c).expect("series coefficients share a grid");
        }
        acc
    };
    let horner_s = |coeffs: &[f64]| coeffs.iter().rev().fold(0.0, |acc, c| acc * d + c);
    SolverState {
        v: horner_f(&series.v_coeffs),
        sigma: horner_s(&series.sigma_coeffs),
        lambda: horner_s(&series.lambda_coeffs),
        c: horner_f(&series.c_coeffs),
    }
}

/// Least-squares slope of `log y` against `log x`. Needs two usable points.
pub fn fit_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Residuals below this are treated as exact and excluded from fits.
pub const FIT_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct TruncationFit {
    pub mus: Vec<f64>,
    pub res_e: Vec<f64>,
    pub res_f: Vec<f64>,
    /// `None` when the residuals are all at the roundoff floor.
    pub slope_e: Option<f64>,
    pub slope_f: Option<f64>,
}

fn floor_filtered(mus: &[f64], res: &[f64]) -> Option<f64> {
    if res.iter().all(|r| *r < FIT_FLOOR) {
        return None;
    }
    fit_log_slope(mus, res)
}

/// Residuals of the partial sums in the family member `mu W`, for each
/// `mu`, with slopes of `log residual` against `log |mu - mu0|`.
pub fn truncation_residual(
    series: &PerturbativeSeries,
    config: &ModelConfig,
    mu_list: &[f64],
) -> Result<TruncationFit> {
    let mut fit = TruncationFit {
        mus: mu_list.to_vec(),
        res_e: Vec::new(),
        res_f: Vec::new(),
        slope_e: None,
        slope_f: None,
    };
    for &mu in mu_list {
        let state = evaluate_series(series, mu);
        let ev = Evaluation::new(&state, &config.scaled(mu))?;
        fit.res_e.push(ev.e.sup_norm());
        fit.res_f.push(ev.f.sup_norm());
    }
    let dmu: Vec<f64> = mu_list.iter().map(|m| (m - series.mu0).abs()).collect();
    fit.slope_e = floor_filtered(&dmu, &fit.res_e);
    if series.kind == SeriesKind::Pair {
        fit.slope_f = floor_filtered(&dmu, &fit.res_f);
    }
    Ok(fit)
}

/// KAM solutions against series partial sums over a list of `mu`.
#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub order: usize,
    pub mus: Vec<f64>,
    pub kam_sigma: Vec<f64>,
    pub kam_lambda: Vec<f64>,
    pub diff_sigma: Vec<f64>,
    pub diff_lambda: Vec<f64>,
    pub diff_v: Vec<f64>,
    pub iterations: Vec<usize>,
    pub slope_sigma: Option<f64>,
    pub slope_lambda: Option<f64>,
    pub slope_v: Option<f64>,
}

/// Solves the family member at each `mu` (starting from the series) and
/// compares with the partial sum of order `order`.
pub fn compare_with_kam(
    series: &PerturbativeSeries,
    config: &ModelConfig,
    order: usize,
    mu_list: &[f64],
    options: &KamOptions,
) -> Result<ConsistencyReport> {
    let runs: Vec<KamRun> = mu_list
        .par_iter()
        .map(|&mu| run_kam(&config.scaled(mu), &evaluate_series(series, mu), options))
        .collect::<Result<_>>()?;
    let partial = series.truncated(order);
    let mut rep = ConsistencyReport {
        order,
        mus: mu_list.to_vec(),
        kam_sigma: Vec::new(),
        kam_lambda: Vec::new(),
        diff_sigma: Vec::new(),
        diff_lambda: Vec::new(),
        diff_v: Vec::new(),
        iterations: Vec::new(),
        slope_sigma: None,
        slope_lambda: None,
        slope_v: None,
    };
    for (run, &mu) in runs.iter().zip(mu_list) {
        let s = evaluate_series(&partial, mu);
        rep.kam_sigma.push(run.state.sigma);
        rep.kam_lambda.push(run.state.lambda);
        rep.diff_sigma.push((run.state.sigma - s.sigma).abs());
        rep.diff_lambda.push((run.state.lambda - s.lambda).abs());
        rep.diff_v.push(run.state.v.distance(&s.v)?);
        rep.iterations.push(run.iterations());
    }
    let dmu: Vec<f64> = mu_list.iter().map(|m| (m - series.mu0).abs()).collect();
    rep.slope_sigma = floor_filtered(&dmu, &rep.diff_sigma);
    rep.slope_lambda = floor_filtered(&dmu, &rep.diff_lambda);
    rep.slope_v = floor_filtered(&dmu, &rep.diff_v);
    Ok(rep)
}

/// Uniform grid `eta_i = i / count` on `[0, 1)`.
pub fn eta_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / count as f64).collect()
}

/// Solves the model at every point of the uniform eta grid, in parallel.
pub fn solve_eta_family(
    config: &ModelConfig,
    guess: &SolverState,
    count: usize,
    options: &KamOptions,
) -> Result<Vec<KamRun>> {
    eta_grid(count)
        .par_iter()
        .map(|&eta| run_kam(&config.with_eta(eta), guess, options))
        .collect()
}

#[derive(Clone, Debug)]
pub struct SymmetryReport {
    pub iota: f64,
    pub etas: Vec<f64>,
    /// `||E[v~, sigma~, lambda~]||` at each eta.
    pub residuals: Vec<f64>,
    pub transformed: Vec<SolverState>,
    /// Largest eta-spectrum energy fraction beyond a third of the grid.
    pub eta_tail: f64,
}

impl SymmetryReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub const ETA_TAIL_THRESHOLD: f64 = 1e-8;

/// Shifts uniformly sampled periodic data by `shift` (in units of the
/// period) using trigonometric interpolation; returns the shifted samples
/// and the energy fraction beyond a third of the spectrum.
fn shift_periodic(samples: &[f64], shift: f64) -> (Vec<f64>, f64, f64) {
    let m = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    let cut = (m / 3) as i64;
    let (mut tail, mut total) = (0.0, 0.0);
    for (i, z) in buf.iter_mut().enumerate() {
        let k = if i < m.div_ceil(2) { i as i64 } else { i as i64 - m as i64 };
        let e = z.norm_sqr();
        total += e;
        if k.abs() > cut {
            tail += e;
        }
        if m % 2 == 0 && i == m / 2 {
            *z = Complex64::new(0.0, 0.0);
        } else {
            *z *= Complex64::from_polar(1.0 / m as f64, 2.0 * PI * k as f64 * shift);
        }
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    (buf.iter().map(|z| z.re).collect(), tail, total)
}

/// Applies the symmetry
/// `v~_eta(psi) = v_{eta + iota beta_eta}(psi + iota beta_psi) + iota`,
/// `sigma~(eta) = sigma(eta + iota beta_eta)`,
/// `lambda~(eta) = lambda(eta + iota beta_eta) - iota sigma(eta + iota beta_eta)`
/// to a family sampled on the uniform eta grid and evaluates the
/// equilibrium residual of the transformed family.
pub fn check_symmetry(family: &[SolverState], config: &ModelConfig, iota: f64) -> Result<SymmetryReport> {
    let m = family.len();
    if m == 0 {
        return Err(KamError::InvalidInput("empty eta family".into()));
    }
    let grid = family[0].grid();
    if family.iter().any(|s| s.grid() != grid) {
        return Err(KamError::ShapeMismatch("eta family on different grids".into()));
    }
    let shift = iota * config.beta_eta();
    let (mut tail, mut total) = (0.0, 0.0);
    let mut columns = vec![vec![0.0; m]; grid.len()];
    for (i, s) in family.iter().enumerate() {
        for (p, &x) in s.v.values().iter().enumerate() {
            columns[p][i] = x;
        }
    }
    let mut shifted_v = vec![vec![0.0; grid.len()]; m];
    for (p, col) in columns.iter().enumerate() {
        let (out, t, e) = shift_periodic(col, shift);
        tail += t;
        total += e;
        for (i, x) in out.into_iter().enumerate() {
            shifted_v[i][p] = x;
        }
    }
    let sig: Vec<f64> = family.iter().map(|s| s.sigma).collect();
    let lam: Vec<f64> = family.iter().map(|s| s.lambda).collect();
    let (sig_s, ts, es) = shift_periodic(&sig, shift);
    let (lam_s, tl, el) = shift_periodic(&lam, shift);
    let frac = |t: f64, e: f64| if e > 0.0 { t / e } else { 0.0 };
    let eta_tail = frac(tail, total).max(frac(ts, es)).max(frac(tl, el));
    if eta_tail > ETA_TAIL_THRESHOLD {
        return Err(KamError::InterpolationUnderResolved(eta_tail));
    }
    let psi_shift: Vec<f64> = config.beta_psi().iter().map(|b| iota * b).collect();
    let etas = eta_grid(m);
    let mut report = SymmetryReport {
        iota,
        etas: etas.clone(),
        residuals: Vec::with_capacity(m),
        transformed: Vec::with_capacity(m),
        eta_tail,
    };
    for i in 0..m {
        let v = SpectralField::from_grid(grid, std::mem::take(&mut shifted_v[i]))?
            .translate(&psi_shift)
            .add_scalar(iota);
        let state = SolverState {
            v,
            sigma: sig_s[i],
            lambda: lam_s[i] - iota * sig_s[i],
            c: family[i].c.clone(),
        };
        let ev = Evaluation::new(&state, &config.with_eta(etas[i]))?;
        report.residuals.push(ev.e.sup_norm());
        report.transformed.push(state);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohomology::diophantine_constant;
    use crate::model::{Potential, PotentialMode};

    fn config() -> ModelConfig {
        let freq = diophantine_constant(&[(5f64.sqrt() - 1.0) / 2.0], 1.0, 200).unwrap();
        ModelConfig::new(freq, vec![1.0, 0.5], 0.3, Potential::cosine(2, 0, 1.0).unwrap()).unwrap()
    }

    fn tilted() -> ModelConfig {
        let p = Potential::new(
            2,
            vec![
                PotentialMode {
                    j: vec![1, 0],
                    amp: Complex64::new(0.5, 0.0),
                },
                PotentialMode {
                    j: vec![1, 1],
                    amp: Complex64::new(0.1, 0.2),
                },
                PotentialMode {
                    j: vec![2, -1],
                    amp: Complex64::new(0.0, 0.15),
                },
                PotentialMode {
                    j: vec![0, 1],
                    amp: Complex64::new(0.05, -0.1),
                },
            ],
        )
        .unwrap();
        config().with_potential(p)
    }

    fn g() -> Grid {
        Grid::new(1, 64).unwrap()
    }

    #[test]
    fn zero_family_has_zero_coefficients() {
        let cfg = config().with_potential(Potential::zero(2));
        let s = expand_series(&cfg, g(), 4).unwrap();
        for n in 1..=4 {
            assert_eq!(s.v_coeffs[n].sup_norm(), 0.0);
            assert_eq!(s.sigma_coeffs[n], 0.0);
            assert_eq!(s.lambda_coeffs[n], 0.0);
        }
        let fit = truncation_residual(&s, &cfg, &[1e-3, 1e-2]).unwrap();
        assert!(fit.slope_e.is_none());
    }

    #[test]
    fn first_order_counterterms() {
        let cfg = tilted();
        let s = expand_series(&cfg, g(), 1).unwrap();
        let t = eval_potential_terms(&SpectralField::zeros(g()), &cfg).unwrap();
        assert!((s.lambda_coeffs[1] + t.w.average()).abs() < 1e-14);
        assert!((s.sigma_coeffs[1] + t.dw.average()).abs() < 1e-14);
        assert!(t.dw.average().abs() > 1e-3);
        // v^1 from the divisors 2 cos(2 pi k Omega) - 2
        let omega = cfg.omega()[0];
        for k in 1..5i64 {
            let div = 2.0 * (2.0 * PI * k as f64 * omega).cos() - 2.0;
            let want = -t.w.coefficient(&[k]) / div;
            assert!((s.v_coeffs[1].coefficient(&[k]) - want).norm() < 1e-13);
        }
    }

    #[test]
    fn cosine_family_sigma_starts_at_fourth_order() {
        let s = expand_series(&config(), g(), 4).unwrap();
        for n in 1..=3 {
            assert!(s.sigma_coeffs[n].abs() < 1e-14, "{n}: {}", s.sigma_coeffs[n]);
        }
        assert!(s.sigma_coeffs[4].abs() > 1.0);
    }

    #[test]
    fn normalization_of_every_order() {
        let s = expand_series(&tilted(), g(), 4).unwrap();
        for v in &s.v_coeffs[1..] {
            assert!(v.average().abs() < 1e-14);
        }
    }

    #[test]
    fn evaluate_at_base_and_linearity() {
        let s = expand_series(&tilted(), g(), 1).unwrap();
        let b = evaluate_series(&s, 0.0);
        assert!(b.distance(&SolverState::trivial(g())).unwrap() == 0.0);
        let one = evaluate_series(&s, 0.01);
        let two = evaluate_series(&s, 0.02);
        assert!(two.v.distance(&one.v.scale(2.0)).unwrap() < 1e-15);
    }

    #[test]
    fn equilibrium_only_has_no_sigma() {
        let opts = SeriesOptions {
            kind: SeriesKind::EquilibriumOnly,
            ..Default::default()
        };
        let s = expand_series_around(&tilted(), &SolverState::trivial(g()), 0.0, 4, &opts).unwrap();
        assert!(s.sigma_coeffs.iter().all(|x| *x == 0.0));
        let fit = truncation_residual(&s, &tilted(), &[1e-3, 3e-3, 1e-2]).unwrap();
        assert!((fit.slope_e.unwrap() - 5.0).abs() < 0.3, "{:?}", fit.slope_e);
    }

    #[test]
    fn log_slope_of_power_law() {
        let x = [1e-3, 1e-2, 1e-1];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(3)).collect();
        assert!((fit_log_slope(&x, &y).unwrap() - 3.0).abs() < 1e-12);
        assert!(fit_log_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn shift_of_band_limited_samples_is_exact() {
        let m = 16;
        let xs: Vec<f64> = (0..m).map(|i| (2.0 * PI * i as f64 / m as f64).cos()).collect();
        let (out, tail, _) = shift_periodic(&xs, 0.1);
        for (i, y) in out.iter().enumerate() {
            let want = (2.0 * PI * (i as f64 / m as f64 + 0.1)).cos();
            assert!((y - want).abs() < 1e-14);
        }
        assert!(tail < 1e-28);
    }
}
