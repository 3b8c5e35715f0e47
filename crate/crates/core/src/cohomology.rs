//! Constant-coefficient cohomology equations `v(psi+Omega) - v(psi) = phi(psi)`
//! and numerical certification of the Diophantine constant of `Omega`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};
use crate::field::SpectralField;

/// Certified constants below this are reported as resonances.
pub const RESONANCE_FLOOR: f64 = 1e-12;
/// Divisors smaller than this in modulus are refused.
pub const DIVISOR_FLOOR: f64 = 1e-13;
/// Admissible mean of a cohomology right-hand side, relative to its sup norm.
pub const MEAN_TOLERANCE: f64 = 1e-9;

/// Rotation vector together with its numerically certified Diophantine data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub omega: Vec<f64>,
    pub tau: f64,
    /// `min |k.omega - m| |k|^tau` over `0 < |k|_1 <= cutoff`.
    pub kappa_hat: f64,
    pub cutoff: usize,
    /// Mode and integer attaining `kappa_hat`.
    pub minimizer: (Vec<i64>, i64),
}

impl Frequency {
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// `2 pi k.omega`
    pub fn phase(&self, k: &[i64]) -> f64 {
        2.0 * PI * k.iter().zip(&self.omega).map(|(&ki, w)| ki as f64 * w).sum::<f64>()
    }

    pub fn negated(&self) -> Vec<f64> {
        self.omega.iter().map(|w| -w).collect()
    }
}

/// Calls `visit` once for each lattice vector with `0 < |k|_1 <= cutoff`
/// whose first nonzero entry is positive (one representative per `+-k`).
fn for_each_half_lattice(dim: usize, cutoff: i64, mut visit: impl FnMut(&[i64])) {
    fn rec(k: &mut Vec<i64>, pos: usize, budget: i64, leading: bool, visit: &mut dyn FnMut(&[i64])) {
        if pos == k.len() {
            if !leading {
                visit(k);
            }
            return;
        }
        let lo = if leading { 0 } else { -budget };
        for ki in lo..=budget {
            k[pos] = ki;
            rec(k, pos + 1, budget - ki.abs(), leading && ki == 0, visit);
        }
        k[pos] = 0;
    }
    let mut k = vec![0; dim];
    rec(&mut k, 0, cutoff, true, &mut visit);
}

pub fn diophantine_constant(omega: &[f64], tau: f64, cutoff: usize) -> Result<Frequency> {
    if omega.is_empty() || omega.iter().any(|w| !w.is_finite()) {
        return Err(KamError::InvalidInput("omega must be a finite nonempty vector".into()));
    }
    if cutoff < 1 {
        return Err(KamError::InvalidInput("cutoff must be at least 1".into()));
    }
    if !(tau > 0.0) {
        return Err(KamError::InvalidInput("tau must be positive".into()));
    }
    let mut best = (f64::INFINITY, Vec::new(), 0i64, f64::INFINITY);
    for_each_half_lattice(omega.len(), cutoff as i64, |k| {
        let x: f64 = k.iter().zip(omega).map(|(&ki, w)| ki as f64 * w).sum();
        let m = x.round();
        let gap = (x - m).abs();
        let norm: i64 = k.iter().map(|v| v.abs()).sum();
        let value = gap * (norm as f64).powf(tau);
        if value < best.0 {
            best = (value, k.to_vec(), m as i64, gap);
        }
    });
    let (kappa_hat, k, m, gap) = best;
    if kappa_hat < RESONANCE_FLOOR {
        return Err(KamError::ResonanceDetected { k, m, gap });
    }
    Ok(Frequency {
        omega: omega.to_vec(),
        tau,
        kappa_hat,
        cutoff,
        minimizer: (k, m),
    })
}

/// Divides every non-Nyquist mode of `rhs` by `divisor(k)`. Modes for which
/// `divisor` returns `None` are set to zero.
pub(crate) fn divide_modes(
    rhs: &SpectralField,
    mut divisor: impl FnMut(&[i64]) -> Option<Complex64>,
) -> Result<SpectralField> {
    let grid = rhs.grid();
    let mut out = Vec::with_capacity(grid.len());
    for (i, &z) in rhs.coefficients().iter().enumerate() {
        if grid.is_nyquist(i) {
            out.push(Complex64::new(0.0, 0.0));
            continue;
        }
        match divisor(&grid.mode(i)) {
            None => out.push(Complex64::new(0.0, 0.0)),
            Some(d) => {
                if d.norm() < DIVISOR_FLOOR {
                    if z.norm() == 0.0 {
                        out.push(Complex64::new(0.0, 0.0));
                        continue;
                    }
                    return Err(KamError::SmallDivisorUnderflow(d.norm()));
                }
                out.push(z / d);
            }
        }
    }
    SpectralField::from_coefficients(grid, out)
}

fn check_dim(field: &SpectralField, freq: &Frequency) -> Result<()> {
    if field.dim() != freq.dim() {
        return Err(KamError::ShapeMismatch(format!(
            "field on T^{} with frequency of length {}",
            field.dim(),
            freq.dim()
        )));
    }
    Ok(())
}

/// Zero-average solution of `v(psi+Omega) - v(psi) = phi - <phi>`, together
/// with the mean that was projected out.
pub fn solve_projected(phi: &SpectralField, freq: &Frequency) -> Result<(SpectralField, f64)> {
    check_dim(phi, freq)?;
    let mean = phi.average();
    let v = divide_modes(phi, |k| {
        if k.iter().all(|&ki| ki == 0) {
            None
        } else {
            Some(Complex64::from_polar(1.0, freq.phase(k)) - 1.0)
        }
    })?;
    Ok((v, mean))
}

/// Solves `v(psi+Omega) - v(psi) = phi(psi)` with `<v> = 0`.
///
/// The mean of `phi` must vanish up to [`MEAN_TOLERANCE`] relative to its
/// sup norm; what remains of it is projected out.
pub fn solve_constant_cohomology(phi: &SpectralField, freq: &Frequency) -> Result<SpectralField> {
    let mean = phi.average();
    let tol = MEAN_TOLERANCE * phi.sup_norm().max(f64::MIN_POSITIVE);
    if mean.abs() > tol {
        return Err(KamError::NonzeroMean { mean, tol });
    }
    solve_projected(phi, freq).map(|(v, _)| v)
}
