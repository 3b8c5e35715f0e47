//! Dense Galerkin solves of the linearized equations, independent of the
//! factorization machinery, for cross-checking the fast solvers.
//!
//! Unknown fields are restricted to the box `|k_i| <= K` and packed as real
//! vectors: the `k = 0` value followed by `(Re, Im)` of one representative
//! of every `+-k` pair. Equations are projected onto the same modes.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{KamError, Result};
use crate::field::{Grid, SpectralField};
use crate::model::{second_factor, ModelConfig, SolverState};
use crate::solver::{build_factors, linear_solve_with, Evaluation, NewtonUpdate};
use crate::cohomology::Frequency;

/// Largest admitted mode cutoff.
pub const MAX_DENSE_CUTOFF: i64 = 64;

/// Which linear system the dense solve assembles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenseTarget {
    /// The true Newton system.
    NewtonExact,
    /// The Newton system plus the term `f v_hat / c_+`, which is what the
    /// factorized solver inverts.
    Factorized,
}

/// Real packing of fields restricted to `|k_i| <= cutoff`.
#[derive(Clone, Debug)]
pub struct ModeBasis {
    grid: Grid,
    pub cutoff: i64,
    /// Representatives `k` with first nonzero entry positive.
    half: Vec<Vec<i64>>,
}

impl ModeBasis {
    pub fn new(grid: Grid, cutoff: i64) -> Result<Self> {
        if cutoff < 1 || cutoff > MAX_DENSE_CUTOFF || cutoff > grid.cutoff() {
            return Err(KamError::InvalidInput(format!(
                "dense cutoff {cutoff} outside 1..={}",
                MAX_DENSE_CUTOFF.min(grid.cutoff())
            )));
        }
        let mut half = Vec::new();
        for i in 0..grid.len() {
            let k = grid.mode(i);
            if k.iter().any(|ki| ki.abs() > cutoff) {
                continue;
            }
            if let Some(first) = k.iter().find(|&&ki| ki != 0) {
                if *first > 0 {
                    half.push(k);
                }
            }
        }
        half.sort();
        Ok(Self { grid, cutoff, half })
    }

    /// Number of real unknowns per field.
    pub fn len(&self) -> usize {
        1 + 2 * self.half.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn project(&self, f: &SpectralField) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        out[0] = f.coefficient(&vec![0; self.grid.dim]).re;
        for (n, k) in self.half.iter().enumerate() {
            let z = f.coefficient(k);
            out[1 + 2 * n] = z.re;
            out[2 + 2 * n] = z.im;
        }
        out
    }

    pub fn field(&self, x: &[f64]) -> Result<SpectralField> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        coeffs[0] = Complex64::new(x[0], 0.0);
        for (n, k) in self.half.iter().enumerate() {
            let z = Complex64::new(x[1 + 2 * n], x[2 + 2 * n]);
            let i = self.grid.mode_index(k).expect("mode on grid");
            coeffs[i] = z;
            let neg: Vec<i64> = k.iter().map(|v| -v).collect();
            coeffs[self.grid.mode_index(&neg).expect("mode on grid")] = z.conj();
        }
        SpectralField::from_coefficients(self.grid, coeffs)
    }

    /// Basis field for unknown `index`.
    pub fn unit(&self, index: usize) -> Result<SpectralField> {
        let mut x = vec![0.0; self.len()];
        x[index] = 1.0;
        self.field(&x)
    }

    /// Matrix of a linear field operator in this basis.
    pub fn matrix(&self, op: impl Fn(&SpectralField) -> Result<SpectralField>) -> Result<DMatrix<f64>> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.project(&op(&self.unit(j)?)?);
            m.set_column(j, &col);
        }
        Ok(m)
    }
}

fn solve_dense(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let x = m.clone().lu().solve(rhs).ok_or(KamError::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(KamError::SingularSystem);
    }
    Ok(x)
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Dense counterpart of [`NewtonUpdate`].
#[derive(Clone, Debug)]
pub struct DenseUpdate {
    pub a: SpectralField,
    pub b: SpectralField,
    pub g: f64,
    pub d: f64,
    pub sigma_hat: f64,
    pub lambda_hat: f64,
    pub c_hat: SpectralField,
    pub v_hat: SpectralField,
    /// Of the fully coupled system.
    pub condition: f64,
    pub target: DenseTarget,
    pub cutoff: i64,
}

/// Block `[[L, 1], [<.>, 0]]` acting on `(v_hat, lambda_hat)`.
fn equilibrium_block(
    basis: &ModeBasis,
    op: &dyn Fn(&SpectralField) -> Result<SpectralField>,
) -> Result<DMatrix<f64>> {
    let n = basis.len();
    let l = basis.matrix(op)?;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&l);
    m[(0, n)] = 1.0;
    m[(n, 0)] = 1.0;
    Ok(m)
}

/// Assembles and solves the linearized equations at `state` over modes
/// `|k_i| <= cutoff`.
pub fn dense_linearized_solve(
    state: &SolverState,
    config: &ModelConfig,
    cutoff: i64,
    target: DenseTarget,
) -> Result<DenseUpdate> {
    let freq = &config.freq;
    let basis = ModeBasis::new(state.grid(), cutoff)?;
    let ev = Evaluation::new(state, config)?;
    let c_plus = state.c.translate(&freq.omega);
    let p = second_factor(state, &ev.terms)?;
    let fa = ev.f.pointwise_div(&c_plus)?;
    let shift = |x: &SpectralField| x.translate(&freq.omega);
    let back = |x: &SpectralField| x.translate(&freq.negated());
    // L v = v_+ + v_- + (-2 + d_beta W_v + sigma) v  (+ f v / c_+)
    let l_op = |x: &SpectralField| -> Result<SpectralField> {
        let mut out = shift(x)
            .add(&back(x))?
            .axpy(-2.0 + state.sigma, x)?
            .add(&ev.terms.dw.pointwise_mul(x)?)?;
        if target == DenseTarget::Factorized {
            out = out.add(&fa.pointwise_mul(x)?)?;
        }
        Ok(out)
    };
    // F-block on c_hat: p c_hat_+ - c_+ c_hat
    let f_op = |x: &SpectralField| -> Result<SpectralField> {
        p.pointwise_mul(&shift(x))?.sub(&c_plus.pointwise_mul(x)?)
    };
    // coupling of v_hat into F: -d_beta d_beta W_v c_+ v_hat
    let ddw_c = ev.terms.ddw.pointwise_mul(&c_plus)?;
    let couple = |x: &SpectralField| -> Result<SpectralField> { Ok(ddw_c.pointwise_mul(x)?.scale(-1.0)) };

    let n = basis.len();
    let lm = basis.matrix(&l_op)?;
    let fm = basis.matrix(&f_op)?;
    let cm = basis.matrix(&couple)?;
    // unknowns [v (n), c (n), sigma, lambda]; rows [E (n), F (n), <v>, <c>]
    let size = 2 * n + 2;
    let mut m = DMatrix::zeros(size, size);
    m.view_mut((0, 0), (n, n)).copy_from(&lm);
    m.view_mut((n, 0), (n, n)).copy_from(&cm);
    m.view_mut((n, n), (n, n)).copy_from(&fm);
    m.view_mut((0, 2 * n), (n, 1)).copy_from(&basis.project(&state.v));
    m.view_mut((n, 2 * n), (n, 1)).copy_from(&basis.project(&c_plus.scale(-1.0)));
    m[(0, 2 * n + 1)] = 1.0;
    m[(2 * n, 0)] = 1.0;
    m[(2 * n + 1, n)] = 1.0;
    let mut rhs = DVector::zeros(size);
    rhs.rows_mut(0, n).copy_from(&basis.project(&ev.e.scale(-1.0)));
    rhs.rows_mut(n, n).copy_from(&basis.project(&ev.f.scale(-1.0)));
    let x = solve_dense(&m, &rhs)?;
    let condition = condition_number(&m);

    // The affine pieces A, G and B, D from the equilibrium block alone.
    let eb = equilibrium_block(&basis, &l_op)?;
    let affine = |r: &SpectralField| -> Result<(SpectralField, f64)> {
        let mut rv = DVector::zeros(n + 1);
        rv.rows_mut(0, n).copy_from(&basis.project(r));
        let y = solve_dense(&eb, &rv)?;
        Ok((basis.field(y.as_slice())?, y[n]))
    };
    let (a, g) = affine(&ev.e.scale(-1.0))?;
    let (b, d) = affine(&state.v.scale(-1.0))?;
    Ok(DenseUpdate {
        a,
        b,
        g,
        d,
        v_hat: basis.field(&x.as_slice()[..n])?,
        c_hat: basis.field(&x.as_slice()[n..2 * n])?,
        sigma_hat: x[2 * n],
        lambda_hat: x[2 * n + 1],
        condition,
        target,
        cutoff,
    })
}

/// Dense solve of `a v_+ - b v = lambda w + phi`, `<v> = 0`.
pub fn dense_twisted_solve(
    a: &SpectralField,
    b: &SpectralField,
    phi: &SpectralField,
    w: &SpectralField,
    freq: &Frequency,
    cutoff: i64,
) -> Result<(f64, SpectralField)> {
    let basis = ModeBasis::new(a.grid(), cutoff)?;
    let n = basis.len();
    let op = basis.matrix(|x| a.pointwise_mul(&x.translate(&freq.omega))?.sub(&b.pointwise_mul(x)?))?;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&op);
    m.view_mut((0, n), (n, 1)).copy_from(&basis.project(&w.scale(-1.0)));
    m[(n, 0)] = 1.0;
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&basis.project(phi));
    let x = solve_dense(&m, &rhs)?;
    Ok((x[n], basis.field(&x.as_slice()[..n])?))
}

/// Differences between the fast and dense updates, relative to the size of
/// the dense quantity (absolute when that is below 1).
#[derive(Clone, Debug)]
pub struct SolverComparison {
    pub target: DenseTarget,
    pub cutoff: i64,
    pub diff_a: f64,
    pub diff_b: f64,
    pub diff_g: f64,
    pub diff_d: f64,
    pub diff_sigma: f64,
    pub diff_lambda: f64,
    pub diff_c: f64,
    pub diff_v: f64,
    /// Sup norm of the dense update `(v_hat, c_hat, sigma_hat, lambda_hat)`.
    pub update_norm: f64,
    pub residual: f64,
    pub condition: f64,
    pub fast_seconds: f64,
    pub dense_seconds: f64,
}

impl SolverComparison {
    pub fn max_diff(&self) -> f64 {
        [
            self.diff_a,
            self.diff_b,
            self.diff_g,
            self.diff_d,
            self.diff_sigma,
            self.diff_lambda,
            self.diff_c,
            self.diff_v,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn timing_ratio(&self) -> f64 {
        self.dense_seconds / self.fast_seconds.max(1e-12)
    }
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1.0)
}

fn rel_field(x: &SpectralField, y: &SpectralField) -> Result<f64> {
    Ok(x.distance(y)? / y.sup_norm().max(1.0))
}

pub fn compare_solvers(
    state: &SolverState,
    config: &ModelConfig,
    cutoff: i64,
    target: DenseTarget,
) -> Result<SolverComparison> {
    let t0 = Instant::now();
    let ev = Evaluation::new(state, config)?;
    let factors = build_factors(state, &config.freq)?;
    let fast: NewtonUpdate = linear_solve_with(state, &ev.terms, &factors, &ev.e, &ev.f, &config.freq)?;
    let fast_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let dense = dense_linearized_solve(state, config, cutoff, target)?;
    let dense_seconds = t1.elapsed().as_secs_f64();
    Ok(SolverComparison {
        target,
        cutoff,
        diff_a: rel_field(&fast.a, &dense.a)?,
        diff_b: rel_field(&fast.b, &dense.b)?,
        diff_g: rel(fast.g, dense.g),
        diff_d: rel(fast.d, dense.d),
        diff_sigma: rel(fast.sigma_hat, dense.sigma_hat),
        diff_lambda: rel(fast.lambda_hat, dense.lambda_hat),
        diff_c: rel_field(&fast.c_hat, &dense.c_hat)?,
        diff_v: rel_field(&fast.v_hat, &dense.v_hat)?,
        update_norm: dense
            .v_hat
            .sup_norm()
            .max(dense.c_hat.sup_norm())
            .max(dense.sigma_hat.abs())
            .max(dense.lambda_hat.abs()),
        residual: ev.residual(),
        condition: dense.condition,
        fast_seconds,
        dense_seconds,
    })
}
