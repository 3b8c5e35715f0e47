//! The quasi-periodic potential, model configuration, and the residuals of
//! the equilibrium and factorization equations.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::cohomology::Frequency;
use crate::error::{KamError, Result};
use crate::field::{Grid, SpectralField};

/// One Fourier mode `amp * exp(2 pi i j.theta)` of the potential.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialMode {
    pub j: Vec<i64>,
    pub amp: Complex64,
}

/// Real trigonometric polynomial on `T^d`, stored with both `j` and `-j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    dim_total: usize,
    modes: Vec<PotentialMode>,
    /// Half-width of the complex strip on which the potential is declared
    /// analytic. Only used by the composition range check.
    pub strip: f64,
}

pub const DEFAULT_POTENTIAL_STRIP: f64 = 2.0;

impl Potential {
    /// Builds a potential, adding the conjugate of any mode whose mirror is
    /// missing. A mirror that is present but not conjugate is an error.
    pub fn new(dim_total: usize, modes: Vec<PotentialMode>) -> Result<Self> {
        if dim_total < 2 {
            return Err(KamError::InvalidDimension(dim_total));
        }
        let mut table: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for m in &modes {
            if m.j.len() != dim_total {
                return Err(KamError::ShapeMismatch(format!(
                    "potential mode {:?} in dimension {dim_total}",
                    m.j
                )));
            }
            *table.entry(m.j.clone()).or_insert(Complex64::new(0.0, 0.0)) += m.amp;
        }
        let keys: Vec<Vec<i64>> = table.keys().cloned().collect();
        for j in keys {
            let neg: Vec<i64> = j.iter().map(|x| -x).collect();
            let amp = table[&j];
            match table.get(&neg) {
                None => {
                    table.insert(neg, amp.conj());
                }
                Some(&other) => {
                    let scale = amp.norm().max(other.norm()).max(1e-300);
                    if (other - amp.conj()).norm() > 1e-12 * scale {
                        return Err(KamError::InvalidInput(format!(
                            "modes {j:?} and {neg:?} are not complex conjugates"
                        )));
                    }
                }
            }
        }
        let modes = table
            .into_iter()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(j, amp)| PotentialMode { j, amp })
            .collect();
        Ok(Self {
            dim_total,
            modes,
            strip: DEFAULT_POTENTIAL_STRIP,
        })
    }

    pub fn zero(dim_total: usize) -> Self {
        Self {
            dim_total,
            modes: Vec::new(),
            strip: DEFAULT_POTENTIAL_STRIP,
        }
    }

    /// `amplitude * cos(2 pi theta_axis)`
    pub fn cosine(dim_total: usize, axis: usize, amplitude: f64) -> Result<Self> {
        let mut j = vec![0; dim_total];
        j[axis] = 1;
        Self::new(
            dim_total,
            vec![PotentialMode {
                j,
                amp: Complex64::new(0.5 * amplitude, 0.0),
            }],
        )
    }

    pub fn dim_total(&self) -> usize {
        self.dim_total
    }

    pub fn modes(&self) -> &[PotentialMode] {
        &self.modes
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn scaled(&self, mu: f64) -> Self {
        Self {
            dim_total: self.dim_total,
            modes: self
                .modes
                .iter()
                .map(|m| PotentialMode {
                    j: m.j.clone(),
                    amp: m.amp * mu,
                })
                .collect(),
            strip: self.strip,
        }
    }

    pub fn evaluate(&self, theta: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let ph: f64 = m.j.iter().zip(theta).map(|(&j, t)| j as f64 * t).sum();
                (m.amp * Complex64::from_polar(1.0, 2.0 * PI * ph)).re
            })
            .sum()
    }

    /// Bounds on `|W|`, `|d_beta W|` and `|d_beta d_beta W|` over the real torus.
    pub fn derivative_bounds(&self, beta: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for m in &self.modes {
            let s = 2.0 * PI * dot(&m.j, beta).abs();
            out[0] += m.amp.norm();
            out[1] += m.amp.norm() * s;
            out[2] += m.amp.norm() * s * s;
        }
        out
    }
}

fn dot(j: &[i64], x: &[f64]) -> f64 {
    j.iter().zip(x).map(|(&a, b)| a as f64 * b).sum()
}

/// Everything that defines one fixed-`eta` equilibrium problem.
#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub freq: Frequency,
    /// Coupling vector of length `d`, split as `(beta_psi, beta_eta)`.
    pub beta: Vec<f64>,
    pub eta: f64,
    pub potential: Potential,
    /// Fraction of the potential strip kept free by the range check.
    pub range_margin: f64,
    /// Strip half-width at which the range check bounds `v`.
    pub analytic_strip: f64,
    /// Refinement factor of the grid used for potential composition.
    pub oversample: usize,
    /// Apply the 2/3 truncation to the composed potential terms.
    pub dealias: bool,
}

impl ModelConfig {
    pub fn new(freq: Frequency, beta: Vec<f64>, eta: f64, potential: Potential) -> Result<Self> {
        let cfg = Self {
            freq,
            beta,
            eta,
            potential,
            range_margin: 0.5,
            analytic_strip: 0.1,
            oversample: 2,
            dealias: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.potential.dim_total();
        if self.beta.len() != d || self.freq.dim() + 1 != d {
            return Err(KamError::ShapeMismatch(format!(
                "d = {d}, beta has {} entries, omega has {}",
                self.beta.len(),
                self.freq.dim()
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) || !self.eta.is_finite() {
            return Err(KamError::InvalidInput("beta and eta must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.range_margin) || self.oversample == 0 {
            return Err(KamError::InvalidInput("range_margin in [0,1), oversample >= 1".into()));
        }
        Ok(())
    }

    /// Torus dimension `d - 1` of the unknown functions.
    pub fn dim(&self) -> usize {
        self.freq.dim()
    }

    pub fn beta_psi(&self) -> &[f64] {
        &self.beta[..self.dim()]
    }

    pub fn beta_eta(&self) -> f64 {
        self.beta[self.dim()]
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self {
            eta,
            ..self.clone()
        }
    }

    pub fn with_potential(&self, potential: Potential) -> Self {
        Self {
            potential,
            ..self.clone()
        }
    }

    /// The member `mu W` of the family generated by this potential.
    pub fn scaled(&self, mu: f64) -> Self {
        self.with_potential(self.potential.scaled(mu))
    }

    pub fn omega(&self) -> &[f64] {
        &self.freq.omega
    }
}

/// Iterate `(v, sigma, lambda, c)`.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub v: SpectralField,
    pub sigma: f64,
    pub lambda: f64,
    pub c: SpectralField,
}

impl SolverState {
    /// `(0, 0, 0, 1)`, the exact solution for `W = 0`.
    pub fn trivial(grid: Grid) -> Self {
        Self {
            v: SpectralField::zeros(grid),
            sigma: 0.0,
            lambda: 0.0,
            c: SpectralField::constant(grid, 1.0),
        }
    }

    pub fn grid(&self) -> Grid {
        self.v.grid()
    }

    /// Sup-norm distance over all four components.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self
            .v
            .distance(&other.v)?
            .max(self.c.distance(&other.c)?)
            .max((self.sigma - other.sigma).abs())
            .max((self.lambda - other.lambda).abs()))
    }

    pub fn resample(&self, size: usize) -> Result<Self> {
        Ok(Self {
            v: self.v.resample(size)?,
            sigma: self.sigma,
            lambda: self.lambda,
            c: self.c.resample(size)?,
        })
    }
}

/// `W`, `d_beta W` and `d_beta d_beta W` composed with `(psi, eta) + beta v(psi)`.
#[derive(Clone, Debug)]
pub struct PotentialTerms {
    pub w: SpectralField,
    pub dw: SpectralField,
    pub ddw: SpectralField,
    /// Spectral energy fraction of the refined composition beyond the
    /// working grid's dealiasing cutoff.
    pub tail_fraction: f64,
}

/// Relative size below which Fourier coefficients count as roundoff in the
/// range check.
pub const RANGE_NOISE_FLOOR: f64 = 1e-11;

/// Checks that the complexified composition stays inside the potential's
/// declared strip with the configured margin.
pub fn range_check(v: &SpectralField, config: &ModelConfig) -> Result<()> {
    // Coefficients at the roundoff floor would otherwise dominate the
    // exponentially weighted bound on fine grids.
    let floor = RANGE_NOISE_FLOOR * v.coefficients().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let denoised = SpectralField::from_coefficients(
        v.grid(),
        v.coefficients()
            .iter()
            .map(|&z| if z.norm() > floor { z } else { Complex64::new(0.0, 0.0) })
            .collect(),
    )?;
    let cert = denoised.analytic_norm_bound(config.analytic_strip);
    let beta_max = config.beta.iter().map(|b| b.abs()).fold(0.0, f64::max);
    let reach = config.analytic_strip + beta_max * cert.bound;
    let limit = (1.0 - config.range_margin) * config.potential.strip;
    if cert.overflow || !reach.is_finite() || reach > limit {
        return Err(KamError::RangeViolation(format!(
            "imaginary reach {reach:.3e} exceeds {limit:.3e}"
        )));
    }
    Ok(())
}

pub fn eval_potential_terms(v: &SpectralField, config: &ModelConfig) -> Result<PotentialTerms> {
    if v.dim() != config.dim() {
        return Err(KamError::ShapeMismatch(format!(
            "v on T^{} for a model on T^{}",
            v.dim(),
            config.dim()
        )));
    }
    range_check(v, config)?;
    let grid = v.grid();
    if config.potential.is_zero() {
        let z = SpectralField::zeros(grid);
        return Ok(PotentialTerms {
            w: z.clone(),
            dw: z.clone(),
            ddw: z,
            tail_fraction: 0.0,
        });
    }
    let fine_size = grid.size * config.oversample.next_power_of_two();
    let fine_v = v.resample(fine_size)?;
    let fine = fine_v.grid();
    let dim = config.dim();
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = [vec![zero; fine.len()], vec![zero; fine.len()], vec![zero; fine.len()]];
    let values = fine_v.values();
    for m in config.potential.modes() {
        let s = 2.0 * PI * dot(&m.j, &config.beta);
        let eta_phase = m.j[dim] as f64 * config.eta;
        for (i, &vi) in values.iter().enumerate() {
            let psi = fine.point(i);
            let base: f64 = m.j[..dim].iter().zip(&psi).map(|(&j, p)| j as f64 * p).sum();
            let term = m.amp * Complex64::from_polar(1.0, 2.0 * PI * (base + eta_phase) + s * vi);
            acc[0][i] += term;
            acc[1][i] += term * Complex64::new(0.0, s);
            acc[2][i] += term * (-s * s);
        }
    }
    let mut fields = Vec::with_capacity(3);
    let mut tail = 0.0;
    for (n, a) in acc.iter().enumerate() {
        let f = SpectralField::from_complex_grid(fine, a)?;
        if n == 0 {
            tail = cutoff_tail(&f, grid.cutoff());
        }
        let coarse = f.resample(grid.size)?;
        fields.push(if config.dealias { coarse.dealias() } else { coarse });
    }
    let ddw = fields.pop().unwrap();
    let dw = fields.pop().unwrap();
    let w = fields.pop().unwrap();
    Ok(PotentialTerms {
        w,
        dw,
        ddw,
        tail_fraction: tail,
    })
}

fn cutoff_tail(f: &SpectralField, cut: i64) -> f64 {
    let grid = f.grid();
    let (mut tail, mut total) = (0.0, 0.0);
    for (i, z) in f.coefficients().iter().enumerate() {
        let e = z.norm_sqr();
        total += e;
        if grid.mode(i).iter().any(|k| k.abs() > cut) {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// `v_+ + v_- - 2v + W_v + sigma v + lambda`, given precomputed terms.
pub fn equilibrium_residual_with(
    state: &SolverState,
    terms: &PotentialTerms,
    freq: &Frequency,
) -> Result<SpectralField> {
    let v = &state.v;
    v.translate(&freq.omega)
        .add(&v.translate(&freq.negated()))?
        .axpy(-2.0 + state.sigma, v)?
        .add(&terms.w)
        .map(|f| f.add_scalar(state.lambda))
}

/// `(-c + 2 - d_beta W_v - sigma) c_+ - 1`, given precomputed terms.
pub fn factorization_residual_with(
    state: &SolverState,
    terms: &PotentialTerms,
    freq: &Frequency,
) -> Result<SpectralField> {
    let p = second_factor(state, terms)?;
    Ok(p.pointwise_mul(&state.c.translate(&freq.omega))?.add_scalar(-1.0))
}

/// `-c + 2 - d_beta W_v - sigma`
pub(crate) fn second_factor(state: &SolverState, terms: &PotentialTerms) -> Result<SpectralField> {
    Ok(state
        .c
        .scale(-1.0)
        .sub(&terms.dw)?
        .add_scalar(2.0 - state.sigma))
}

pub fn equilibrium_residual(state: &SolverState, config: &ModelConfig) -> Result<SpectralField> {
    let terms = eval_potential_terms(&state.v, config)?;
    equilibrium_residual_with(state, &terms, &config.freq)
}

pub fn factorization_residual(state: &SolverState, config: &ModelConfig) -> Result<SpectralField> {
    let terms = eval_potential_terms(&state.v, config)?;
    factorization_residual_with(state, &terms, &config.freq)
}

/// Configured bounds for the non-degeneracy report.
#[derive(Clone, Debug, PartialEq)]
pub struct NondegeneracyThresholds {
    /// bound on `||c - 1||`
    pub m1: f64,
    /// bound on `|sigma|`
    pub m2: f64,
    /// bound on the directional C^2 size of the potential
    pub m3: f64,
    /// bound on `||v||`
    pub m_v: f64,
    /// lower bound for `c` and for the second factor coefficient
    pub positivity: f64,
    /// lower bound for `|<-c_+ - d_beta d_beta W_v c_+ B>|`
    pub transversality: f64,
}

impl Default for NondegeneracyThresholds {
    fn default() -> Self {
        Self {
            m1: 0.5,
            m2: 0.5,
            m3: 5.0,
            m_v: 0.5,
            positivity: 1e-3,
            transversality: crate::twisted::TRANSVERSALITY_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    /// Positive when the check passes.
    pub margin: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &'static str, value: f64, threshold: f64) -> Self {
        let passed = value.is_finite() && value < threshold;
        Self {
            name,
            value,
            threshold,
            margin: threshold - value,
            passed,
        }
    }

    fn above(name: &'static str, value: f64, threshold: f64) -> Self {
        let passed = value.is_finite() && value > threshold;
        Self {
            name,
            value,
            threshold,
            margin: value - threshold,
            passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NondegeneracyReport {
    pub checks: Vec<Check>,
}

impl NondegeneracyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

/// Evaluates the non-degeneracy conditions at `state`. Never fails: checks
/// that cannot be evaluated are reported as failed with a NaN value.
pub fn check_nondegeneracy(
    state: &SolverState,
    config: &ModelConfig,
    thresholds: &NondegeneracyThresholds,
) -> NondegeneracyReport {
    let mut checks = vec![
        Check::below("c_minus_one", state.c.add_scalar(-1.0).sup_norm(), thresholds.m1),
        Check::below("sigma", state.sigma.abs(), thresholds.m2),
        Check::below(
            "potential_c2",
            config
                .potential
                .derivative_bounds(&config.beta)
                .into_iter()
                .fold(0.0, f64::max),
            thresholds.m3,
        ),
        Check::below("v", state.v.sup_norm(), thresholds.m_v),
        Check::above("c_positive", state.c.min_value(), thresholds.positivity),
    ];
    let terms = eval_potential_terms(&state.v, config);
    checks.push(Check::above(
        "range",
        if terms.is_ok() { 1.0 } else { f64::NAN },
        0.0,
    ));
    let second = terms
        .as_ref()
        .ok()
        .and_then(|t| second_factor(state, t).ok())
        .map(|p| p.min_value())
        .unwrap_or(f64::NAN);
    checks.push(Check::above("second_factor_positive", second, thresholds.positivity));
    let transversal = crate::solver::transversality(state, config).unwrap_or(f64::NAN);
    checks.push(Check::above(
        "transversality",
        transversal.abs(),
        thresholds.transversality,
    ));
    NondegeneracyReport { checks }
}
