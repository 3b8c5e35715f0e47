//! Factorized quasi-Newton iteration for the equilibrium and factorization
//! equations.
//!
//! The linearized equilibrium operator is replaced by `A_+ A_-`, where
//! `A_+ u = a u_+ - u` with `a = 1/c_+` and `A_- u = c u - u_-`. Both factors
//! are twisted cohomology operators; the second is solved in the shifted
//! form `c_+ X_+ - X = y_+`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cohomology::Frequency;
use crate::error::{KamError, Result};
use crate::field::SpectralField;
use crate::model::{
    check_nondegeneracy, equilibrium_residual_with, eval_potential_terms,
    factorization_residual_with, second_factor, ModelConfig, NondegeneracyThresholds,
    PotentialTerms, SolverState,
};
use crate::twisted::{solve_with_operator, Branch, TwistedOperator, TRANSVERSALITY_TOL};

/// The two twisted operators making up the factorized linearization.
#[derive(Clone, Debug)]
pub struct FactorData {
    /// `1 / c_+`
    pub a: SpectralField,
    pub c_plus: SpectralField,
    /// `y -> a y_+ - y`
    pub plus: TwistedOperator,
    /// `X -> c_+ X_+ - X`
    pub minus: TwistedOperator,
}

impl FactorData {
    /// `(a_bar_+, a_bar_-)`; the `b` averages are both 1.
    pub fn averages(&self) -> (f64, f64) {
        (self.plus.a.avg_coeff, self.minus.a.avg_coeff)
    }
}

pub fn build_factors(state: &SolverState, freq: &Frequency) -> Result<FactorData> {
    let c_plus = state.c.translate(&freq.omega);
    let min = c_plus.min_value();
    if !(min > crate::field::POSITIVITY_FLOOR) {
        return Err(KamError::NonPositiveCoefficient { min });
    }
    let a = c_plus.map(|x| 1.0 / x);
    let one = SpectralField::constant(state.c.grid(), 1.0);
    let plus = TwistedOperator::new(&a, &one, freq)?;
    let minus = TwistedOperator::new(&c_plus, &one, freq)?;
    Ok(FactorData {
        a,
        c_plus,
        plus,
        minus,
    })
}

/// Which of the four average-coefficient cases a chain solve went through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Case {
    /// both factors with different averages
    A,
    /// `A_+` equal, `A_-` different
    B,
    /// `A_+` different, `A_-` equal
    C,
    /// both equal
    D,
}

impl Case {
    fn of(plus: Branch, minus: Branch) -> Self {
        match (plus.is_equal(), minus.is_equal()) {
            (false, false) => Case::A,
            (true, false) => Case::B,
            (false, true) => Case::C,
            (true, true) => Case::D,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Case::A => "5a",
            Case::B => "5b",
            Case::C => "5c",
            Case::D => "5d",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Zero-mean `X` and constant `G` with `A_+ A_- X + G = rhs`.
#[derive(Clone, Debug)]
pub struct ChainSolution {
    pub x: SpectralField,
    pub g: f64,
    pub case: Case,
    /// Smallest denominator divided by while threading the constants.
    pub transversality: f64,
}

pub fn solve_chain(factors: &FactorData, rhs: &SpectralField, freq: &Frequency) -> Result<ChainSolution> {
    let plus = &factors.plus;
    // First factor: a y_+ - y = rhs - G has the solutions
    // y = P(rhs) - G P(1) + t h with sol(rhs) - G sol(1) = (a_bar - 1) t,
    // so y = y0 + t y1 and G = g0 + t g1 with t still free.
    let one = SpectralField::constant(rhs.grid(), 1.0);
    let sol_one = plus.solvability(&one)?;
    if sol_one.abs() < TRANSVERSALITY_TOL {
        return Err(KamError::TransversalityLoss(sol_one));
    }
    let g0 = plus.solvability(rhs)? / sol_one;
    let g1 = -plus.mean_divisor() / sol_one;
    let p_one = plus.nonzero_part(&one)?;
    let y0 = plus.nonzero_part(rhs)?.axpy(-g0, &p_one)?;
    let y1 = plus.homogeneous().axpy(-g1, &p_one)?;
    // Second factor: c_+ X_+ - X = (y0 + s y1)_+ fixes s and <X> = 0.
    let sol = solve_with_operator(
        &factors.minus,
        &y0.translate(&freq.omega),
        &y1.translate(&freq.omega),
    )?;
    Ok(ChainSolution {
        x: sol.v,
        g: g0 + sol.lambda * g1,
        case: Case::of(plus.branch(), factors.minus.branch()),
        transversality: sol.transversality.abs().min(sol_one.abs()),
    })
}

/// `A_+ A_- X`
pub fn apply_chain(factors: &FactorData, x: &SpectralField, freq: &Frequency) -> Result<SpectralField> {
    let y = factors
        .c_plus
        .translate(&freq.negated())
        .pointwise_mul(x)?
        .sub(&x.translate(&freq.negated()))?;
    factors
        .a
        .pointwise_mul(&y.translate(&freq.omega))?
        .sub(&y)
}

/// `A_+ A_- A + G = -e`
pub fn solve_ag(factors: &FactorData, e: &SpectralField, freq: &Frequency) -> Result<ChainSolution> {
    solve_chain(factors, &e.scale(-1.0), freq)
}

/// `A_+ A_- B + D = -v`
pub fn solve_bd(factors: &FactorData, v: &SpectralField, freq: &Frequency) -> Result<ChainSolution> {
    solve_chain(factors, &v.scale(-1.0), freq)
}

/// Counterterm weight `-c_+ - d_beta d_beta W_v c_+ B`.
fn sigma_weight(terms: &PotentialTerms, c_plus: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    Ok(c_plus
        .scale(-1.0)
        .sub(&terms.ddw.pointwise_mul(c_plus)?.pointwise_mul(b)?)?)
}

#[derive(Clone, Debug)]
pub struct SigmaSolution {
    pub sigma_hat: f64,
    pub c_hat: SpectralField,
    pub branch: Branch,
    /// `<-c_+ - d_beta d_beta W_v c_+ B>`
    pub weight_average: f64,
    pub transversality: f64,
}

/// Solves
/// `p c_hat_+ - c_+ c_hat + w sigma_hat = d_beta d_beta W_v c_+ A - f`, `<c_hat> = 0`,
/// with `p = -c + 2 - d_beta W_v - sigma` and `w` the counterterm weight.
pub fn solve_sigma_c(
    state: &SolverState,
    terms: &PotentialTerms,
    a_fn: &SpectralField,
    b_fn: &SpectralField,
    f: &SpectralField,
    freq: &Frequency,
) -> Result<SigmaSolution> {
    let c_plus = state.c.translate(&freq.omega);
    let p = second_factor(state, terms)?;
    let w = sigma_weight(terms, &c_plus, b_fn)?;
    let weight_average = w.average();
    if weight_average.abs() < TRANSVERSALITY_TOL {
        return Err(KamError::TransversalityLoss(weight_average));
    }
    let phi = terms.ddw.pointwise_mul(&c_plus)?.pointwise_mul(a_fn)?.sub(f)?;
    let op = TwistedOperator::new(&p, &c_plus, freq)?;
    let sol = solve_with_operator(&op, &phi, &w.scale(-1.0))?;
    Ok(SigmaSolution {
        sigma_hat: sol.lambda,
        c_hat: sol.v,
        branch: sol.branch,
        weight_average,
        transversality: sol.transversality,
    })
}

/// Average of the counterterm weight at `state`, the quantity that must stay
/// away from zero for `sigma_hat` to be determined.
pub fn transversality(state: &SolverState, config: &ModelConfig) -> Result<f64> {
    let terms = eval_potential_terms(&state.v, config)?;
    let factors = build_factors(state, &config.freq)?;
    let bd = solve_bd(&factors, &state.v, &config.freq)?;
    Ok(sigma_weight(&terms, &factors.c_plus, &bd.x)?.average())
}

/// Corrections produced by one factorized linear solve.
#[derive(Clone, Debug)]
pub struct NewtonUpdate {
    pub a: SpectralField,
    pub b: SpectralField,
    pub g: f64,
    pub d: f64,
    pub sigma_hat: f64,
    pub lambda_hat: f64,
    pub c_hat: SpectralField,
    pub v_hat: SpectralField,
    pub case_ag: Case,
    pub case_bd: Case,
    pub sigma_branch: Branch,
    pub weight_average: f64,
    pub transversality: f64,
}

/// Solves the factorized linear system at `state` for given residuals.
pub fn linear_solve_with(
    state: &SolverState,
    terms: &PotentialTerms,
    factors: &FactorData,
    e: &SpectralField,
    f: &SpectralField,
    freq: &Frequency,
) -> Result<NewtonUpdate> {
    let ag = solve_ag(factors, e, freq)?;
    let bd = solve_bd(factors, &state.v, freq)?;
    let sc = solve_sigma_c(state, terms, &ag.x, &bd.x, f, freq)?;
    let v_hat = ag.x.axpy(sc.sigma_hat, &bd.x)?;
    Ok(NewtonUpdate {
        lambda_hat: ag.g + sc.sigma_hat * bd.g,
        sigma_hat: sc.sigma_hat,
        v_hat,
        a: ag.x,
        b: bd.x,
        g: ag.g,
        d: bd.g,
        c_hat: sc.c_hat,
        case_ag: ag.case,
        case_bd: bd.case,
        sigma_branch: sc.branch,
        weight_average: sc.weight_average,
        transversality: ag
            .transversality
            .min(bd.transversality)
            .min(sc.transversality.abs()),
    })
}

pub fn linear_solve(
    state: &SolverState,
    config: &ModelConfig,
    e: &SpectralField,
    f: &SpectralField,
) -> Result<NewtonUpdate> {
    let terms = eval_potential_terms(&state.v, config)?;
    let factors = build_factors(state, &config.freq)?;
    linear_solve_with(state, &terms, &factors, e, f, &config.freq)
}

/// The Newton update at `state` for its own residuals.
pub fn newton_update(state: &SolverState, config: &ModelConfig) -> Result<NewtonUpdate> {
    let terms = eval_potential_terms(&state.v, config)?;
    let e = equilibrium_residual_with(state, &terms, &config.freq)?;
    let f = factorization_residual_with(state, &terms, &config.freq)?;
    let factors = build_factors(state, &config.freq)?;
    linear_solve_with(state, &terms, &factors, &e, &f, &config.freq)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub iteration: usize,
    pub res_e_before: f64,
    pub res_f_before: f64,
    pub res_e_after: f64,
    pub res_f_after: f64,
    pub case_ag: Case,
    pub case_bd: Case,
    pub sigma_branch: Branch,
    pub norm_v_hat: f64,
    pub sigma_hat: f64,
    pub lambda_hat: f64,
    pub norm_c_hat: f64,
    /// `<-c_+ - d_beta d_beta W_v c_+ B>`
    pub weight_average: f64,
    pub transversality: f64,
    /// `||f v_hat / c_+||`, the term left out of the factorized system.
    pub dropped_term: f64,
    pub tail_fraction: f64,
    pub under_resolved: bool,
    /// State after the step.
    pub sigma: f64,
    pub lambda: f64,
    pub norm_v: f64,
}

impl StepReport {
    pub fn residual_before(&self) -> f64 {
        self.res_e_before.max(self.res_f_before)
    }

    pub fn residual_after(&self) -> f64 {
        self.res_e_after.max(self.res_f_after)
    }

    /// `"5a/5a"`: cases of the `(A, G)` and `(B, D)` solves.
    pub fn branch_label(&self) -> String {
        format!("{}/{}", self.case_ag, self.case_bd)
    }

    /// True if a case other than 5a or 5d was reached.
    pub fn unexpected_case(&self) -> bool {
        [self.case_ag, self.case_bd]
            .iter()
            .any(|c| matches!(c, Case::B | Case::C))
    }
}

/// Residuals and potential terms at one iterate, reused across a step.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub terms: PotentialTerms,
    pub e: SpectralField,
    pub f: SpectralField,
}

impl Evaluation {
    pub fn new(state: &SolverState, config: &ModelConfig) -> Result<Self> {
        let terms = eval_potential_terms(&state.v, config)?;
        let e = equilibrium_residual_with(state, &terms, &config.freq)?;
        let f = factorization_residual_with(state, &terms, &config.freq)?;
        Ok(Self { terms, e, f })
    }

    pub fn residual(&self) -> f64 {
        self.e.sup_norm().max(self.f.sup_norm())
    }
}

pub const TAIL_THRESHOLD: f64 = 1e-8;

fn step_from(
    state: &SolverState,
    eval: &Evaluation,
    config: &ModelConfig,
    iteration: usize,
) -> Result<(SolverState, Evaluation, StepReport)> {
    let freq = &config.freq;
    let factors = build_factors(state, freq)?;
    let up = linear_solve_with(state, &eval.terms, &factors, &eval.e, &eval.f, freq)?;
    let dropped = eval
        .f
        .pointwise_mul(&up.v_hat)?
        .pointwise_mul(&factors.a)?
        .sup_norm();
    let next = SolverState {
        v: state.v.add(&up.v_hat)?.centered(),
        sigma: state.sigma + up.sigma_hat,
        lambda: state.lambda + up.lambda_hat,
        c: state.c.add(&up.c_hat)?,
    };
    let next_eval = Evaluation::new(&next, config)?;
    let report = StepReport {
        iteration,
        res_e_before: eval.e.sup_norm(),
        res_f_before: eval.f.sup_norm(),
        res_e_after: next_eval.e.sup_norm(),
        res_f_after: next_eval.f.sup_norm(),
        case_ag: up.case_ag,
        case_bd: up.case_bd,
        sigma_branch: up.sigma_branch,
        norm_v_hat: up.v_hat.sup_norm(),
        sigma_hat: up.sigma_hat,
        lambda_hat: up.lambda_hat,
        norm_c_hat: up.c_hat.sup_norm(),
        weight_average: up.weight_average,
        transversality: up.transversality,
        dropped_term: dropped,
        tail_fraction: next_eval.terms.tail_fraction,
        under_resolved: next_eval.terms.tail_fraction > TAIL_THRESHOLD,
        sigma: next.sigma,
        lambda: next.lambda,
        norm_v: next.v.sup_norm(),
    };
    Ok((next, next_eval, report))
}

/// One factorized Newton step. On error the input state is untouched.
pub fn newton_step(state: &SolverState, config: &ModelConfig) -> Result<(SolverState, StepReport)> {
    let eval = Evaluation::new(state, config)?;
    step_from(state, &eval, config, 1).map(|(s, _, r)| (s, r))
}

#[derive(Clone, Debug)]
pub struct KamOptions {
    /// Absolute tolerance on `max(||e||, ||f||)`.
    pub tol: f64,
    pub max_iter: usize,
    /// A step counts as stalled when it keeps more than this fraction of
    /// the residual.
    pub stall_ratio: f64,
    /// Consecutive stalled steps before giving up.
    pub stall_steps: usize,
    pub check_nondegeneracy: bool,
    pub thresholds: NondegeneracyThresholds,
}

impl Default for KamOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 30,
            stall_ratio: 0.9,
            stall_steps: 2,
            check_nondegeneracy: true,
            thresholds: NondegeneracyThresholds::default(),
        }
    }
}

/// Outcome of a run, kept even when it fails.
#[derive(Clone, Debug)]
pub struct KamTrace {
    pub result: Result<SolverState>,
    pub initial_res_e: f64,
    pub initial_res_f: f64,
    pub history: Vec<StepReport>,
}

impl KamTrace {
    /// `eps_0, eps_1, ...`: the residual before the first step, then after each.
    pub fn residuals(&self) -> Vec<f64> {
        let mut out = vec![self.initial_res_e.max(self.initial_res_f)];
        out.extend(self.history.iter().map(|r| r.residual_after()));
        out
    }
}

#[derive(Clone, Debug)]
pub struct KamRun {
    pub state: SolverState,
    pub initial_res_e: f64,
    pub initial_res_f: f64,
    pub history: Vec<StepReport>,
}

impl KamRun {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.history
            .last()
            .map(|r| r.residual_after())
            .unwrap_or(self.initial_res_e.max(self.initial_res_f))
    }
}

pub fn run_kam_traced(config: &ModelConfig, guess: &SolverState, options: &KamOptions) -> KamTrace {
    let mut trace = KamTrace {
        result: Err(KamError::InvalidInput("not started".into())),
        initial_res_e: f64::NAN,
        initial_res_f: f64::NAN,
        history: Vec::new(),
    };
    let mut state = SolverState {
        v: guess.v.centered(),
        ..guess.clone()
    };
    let mut eval = match Evaluation::new(&state, config) {
        Ok(e) => e,
        Err(err) => {
            trace.result = Err(err);
            return trace;
        }
    };
    trace.initial_res_e = eval.e.sup_norm();
    trace.initial_res_f = eval.f.sup_norm();
    if options.check_nondegeneracy {
        let report = check_nondegeneracy(&state, config, &options.thresholds);
        if !report.passed() {
            trace.result = Err(KamError::Degenerate(report.failures().join(",")));
            return trace;
        }
    }
    let mut residual = eval.residual();
    let mut stalled = 0;
    for iteration in 1..=options.max_iter {
        if residual < options.tol {
            break;
        }
        let (next, next_eval, report) = match step_from(&state, &eval, config, iteration) {
            Ok(x) => x,
            Err(err) => {
                trace.result = Err(err);
                return trace;
            }
        };
        let after = report.residual_after();
        trace.history.push(report);
        if !(after <= options.stall_ratio * residual) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        state = next;
        eval = next_eval;
        residual = after;
        if residual < options.tol {
            break;
        }
        if stalled >= options.stall_steps || !residual.is_finite() {
            trace.result = Err(KamError::NoProgress {
                iterations: iteration,
                residual,
            });
            return trace;
        }
    }
    trace.result = if residual < options.tol {
        Ok(state)
    } else {
        Err(KamError::MaxIterations {
            iterations: trace.history.len(),
            residual,
        })
    };
    trace
}

pub fn run_kam(config: &ModelConfig, guess: &SolverState, options: &KamOptions) -> Result<KamRun> {
    let trace = run_kam_traced(config, guess, options);
    let state = trace.result?;
    Ok(KamRun {
        state,
        initial_res_e: trace.initial_res_e,
        initial_res_f: trace.initial_res_f,
        history: trace.history,
    })
}

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    pub scale: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Highest Fourier mode (per axis) in the random perturbations.
    pub modes: i64,
    pub tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            scale: 1e-4,
            restarts: 10,
            seed: 7,
            modes: 8,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub distances: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl ProbeReport {
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

/// Zero-mean band-limited random field with sup norm `scale`.
pub fn random_perturbation(
    grid: crate::field::Grid,
    modes: i64,
    scale: f64,
    rng: &mut impl Rng,
) -> Result<SpectralField> {
    let mut coeffs = vec![num_complex::Complex64::new(0.0, 0.0); grid.len()];
    let cut = modes.min(grid.cutoff());
    for (i, z) in coeffs.iter_mut().enumerate() {
        let k = grid.mode(i);
        if k.iter().all(|&ki| ki == 0) || k.iter().any(|ki| ki.abs() > cut) {
            continue;
        }
        *z = num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    let f = SpectralField::from_coefficients(grid, coeffs)?;
    let norm = f.sup_norm();
    Ok(if norm > 0.0 { f.scale(scale / norm) } else { f })
}

/// Restarts the iteration from random perturbations of `solution` and checks
/// that every run returns to it. Perturbations of `v` and `c` have zero mean:
/// the normalization fixes `<v>`, and `<c>` labels a family of equivalent
/// factorizations.
pub fn uniqueness_probe(
    config: &ModelConfig,
    solution: &SolverState,
    probe: &ProbeOptions,
    options: &KamOptions,
) -> Result<ProbeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let grid = solution.grid();
    let mut report = ProbeReport {
        distances: Vec::new(),
        iterations: Vec::new(),
    };
    for index in 0..probe.restarts {
        let guess = SolverState {
            v: solution
                .v
                .add(&random_perturbation(grid, probe.modes, probe.scale, &mut rng)?)?,
            c: solution
                .c
                .add(&random_perturbation(grid, probe.modes, probe.scale, &mut rng)?)?,
            sigma: solution.sigma + probe.scale * rng.random_range(-1.0..1.0),
            lambda: solution.lambda + probe.scale * rng.random_range(-1.0..1.0),
        };
        let run = run_kam(config, &guess, options)?;
        let distance = run.state.distance(solution)?;
        report.distances.push(distance);
        report.iterations.push(run.iterations());
        if !(distance <= probe.tol) {
            return Err(KamError::UniquenessViolation { index, distance });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohomology::diophantine_constant;
    use crate::field::Grid;
    use crate::model::Potential;
    use std::f64::consts::PI;

    fn config(mu: f64) -> ModelConfig {
        let freq = diophantine_constant(&[(5f64.sqrt() - 1.0) / 2.0], 1.0, 200).unwrap();
        ModelConfig::new(freq, vec![1.0, 0.5], 0.0, Potential::cosine(2, 0, mu).unwrap()).unwrap()
    }

    fn g() -> Grid {
        Grid::new(1, 64).unwrap()
    }

    #[test]
    fn unit_c_factors_are_equal_average() {
        let s = SolverState::trivial(g());
        let f = build_factors(&s, &config(0.0).freq).unwrap();
        assert_eq!(f.averages(), (1.0, 1.0));
        assert!(f.plus.branch().is_equal() && f.minus.branch().is_equal());
    }

    #[test]
    fn constant_c_averages() {
        let mut s = SolverState::trivial(g());
        s.c = SpectralField::constant(g(), 0.05f64.exp());
        let f = build_factors(&s, &config(0.0).freq).unwrap();
        let (p, m) = f.averages();
        assert!((p - (-0.05f64).exp()).abs() < 1e-14);
        assert!((m - 0.05f64.exp()).abs() < 1e-14);
        assert_eq!(Case::of(f.plus.branch(), f.minus.branch()), Case::A);
    }

    #[test]
    fn a_times_c_plus_is_one() {
        let mut s = SolverState::trivial(g());
        s.c = SpectralField::from_fn(g(), |p| 1.0 + 0.2 * (2.0 * PI * p[0]).sin());
        let f = build_factors(&s, &config(0.0).freq).unwrap();
        let prod = f.a.pointwise_mul(&f.c_plus).unwrap();
        assert!(prod.add_scalar(-1.0).sup_norm() < 1e-13);
    }

    #[test]
    fn zero_rhs_chain() {
        let s = SolverState::trivial(g());
        let freq = config(0.0).freq;
        let f = build_factors(&s, &freq).unwrap();
        let ag = solve_ag(&f, &SpectralField::zeros(g()), &freq).unwrap();
        assert_eq!(ag.x.sup_norm(), 0.0);
        assert_eq!(ag.g, 0.0);
    }

    fn chain_residual(c: SpectralField) -> (Case, f64, f64) {
        let freq = config(0.0).freq;
        let s = SolverState {
            c,
            ..SolverState::trivial(g())
        };
        let f = build_factors(&s, &freq).unwrap();
        let e = SpectralField::from_fn(g(), |p| 0.3 + (2.0 * PI * p[0]).cos() - 0.2 * (4.0 * PI * p[0]).sin());
        let ag = solve_ag(&f, &e, &freq).unwrap();
        let lhs = apply_chain(&f, &ag.x, &freq).unwrap().add_scalar(ag.g);
        (ag.case, lhs.add(&e).unwrap().sup_norm(), ag.x.average().abs())
    }

    #[test]
    fn chain_solves_every_case() {
        let osc = SpectralField::from_fn(g(), |p| 0.1 * (2.0 * PI * p[0]).cos());
        // <c> = 1 with oscillation: <log c> < 0, both factors unequal
        let (case, res, mean) = chain_residual(osc.add_scalar(1.0));
        assert_eq!(case, Case::A);
        assert!(res < 1e-12 && mean < 1e-14, "{res} {mean}");
        // c = exp(oscillation): both equal
        let (case, res, mean) = chain_residual(osc.exp_field());
        assert_eq!(case, Case::D);
        assert!(res < 1e-12 && mean < 1e-14, "{res} {mean}");
    }

    #[test]
    fn equal_case_constant_is_minus_mean_for_unit_c() {
        let freq = config(0.0).freq;
        let f = build_factors(&SolverState::trivial(g()), &freq).unwrap();
        let e = SpectralField::from_fn(g(), |p| 0.3 + (2.0 * PI * p[0]).cos());
        let ag = solve_ag(&f, &e, &freq).unwrap();
        assert_eq!(ag.case, Case::D);
        assert!((ag.g + 0.3).abs() < 1e-15);
    }

    #[test]
    fn exact_solution_is_fixed_point() {
        let cfg = config(0.0);
        let (next, rep) = newton_step(&SolverState::trivial(g()), &cfg).unwrap();
        assert!(rep.norm_v_hat < 1e-13 && rep.norm_c_hat < 1e-13);
        assert!(rep.sigma_hat.abs() < 1e-13 && rep.lambda_hat.abs() < 1e-13);
        assert!(next.distance(&SolverState::trivial(g())).unwrap() < 1e-13);
    }

    #[test]
    fn trivial_problem_converges_immediately() {
        let run = run_kam(&config(0.0), &SolverState::trivial(g()), &KamOptions::default()).unwrap();
        assert_eq!(run.iterations(), 0);
    }

    #[test]
    fn small_potential_converges() {
        let cfg = config(0.05);
        let run = run_kam(&cfg, &SolverState::trivial(g()), &KamOptions::default()).unwrap();
        assert!(run.final_residual() < 1e-12);
        assert!(run.iterations() <= 7, "{}", run.iterations());
        assert!(run.state.v.average().abs() < 1e-12);
        for r in &run.history {
            assert!(!r.unexpected_case());
        }
    }

    #[test]
    fn step_normalizes_guess_mean() {
        let cfg = config(0.05);
        let mut guess = SolverState::trivial(g());
        guess.v = SpectralField::constant(g(), 0.01);
        let run = run_kam(&cfg, &guess, &KamOptions::default()).unwrap();
        assert!(run.state.v.average().abs() < 1e-12);
    }

    #[test]
    fn zero_perturbation_probe() {
        let cfg = config(0.05);
        let run = run_kam(&cfg, &SolverState::trivial(g()), &KamOptions::default()).unwrap();
        let probe = ProbeOptions {
            scale: 0.0,
            restarts: 2,
            ..Default::default()
        };
        let rep = uniqueness_probe(&cfg, &run.state, &probe, &KamOptions::default()).unwrap();
        assert!(rep.max_distance() == 0.0);
    }
}
