//! First-order difference equations with non-constant coefficients,
//!
//! ```text
//! a(psi) v(psi+Omega) - b(psi) v(psi) = lambda w(psi) + phi(psi),   <v> = 0,
//! ```
//!
//! reduced to constant coefficients by writing `a = a_bar gamma_a(.+Omega)/gamma_a`
//! and `b = b_bar gamma_b/gamma_b(.+Omega)`. With `m = gamma_a gamma_b v` the
//! equation becomes `a_bar m_+ - b_bar m = (lambda w + phi) gamma_a (gamma_b)_+`,
//! which is diagonal in Fourier space.

use num_complex::Complex64;

use crate::cohomology::{divide_modes, solve_projected, Frequency, MEAN_TOLERANCE};
use crate::error::{KamError, Result};
use crate::field::SpectralField;

/// Average coefficients closer than this in log are treated as equal.
pub const EQUAL_AVERAGE_TOL: f64 = 1e-8;
/// Minimum modulus of the scalar denominator fixing `lambda`.
pub const TRANSVERSALITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// `coeff = avg * gamma(.+Omega) / gamma`
    Forward,
    /// `coeff = avg * gamma / gamma(.+Omega)`
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    EqualAverage,
    ADominant,
    BDominant,
}

impl Branch {
    pub fn is_equal(self) -> bool {
        self == Branch::EqualAverage
    }

    fn classify(a_bar: f64, b_bar: f64) -> Self {
        let gap = a_bar.ln() - b_bar.ln();
        if gap.abs() <= EQUAL_AVERAGE_TOL {
            Branch::EqualAverage
        } else if gap > 0.0 {
            Branch::ADominant
        } else {
            Branch::BDominant
        }
    }
}

/// A positive coefficient written as its geometric mean times a coboundary.
#[derive(Clone, Debug)]
pub struct TwistedFactorization {
    pub avg_coeff: f64,
    pub gamma: SpectralField,
    pub orientation: Orientation,
}

impl TwistedFactorization {
    pub fn reconstruct(&self, freq: &Frequency) -> Result<SpectralField> {
        let shifted = self.gamma.translate(&freq.omega);
        let ratio = match self.orientation {
            Orientation::Forward => shifted.pointwise_div(&self.gamma)?,
            Orientation::Backward => self.gamma.pointwise_div(&shifted)?,
        };
        Ok(ratio.scale(self.avg_coeff))
    }
}

pub fn factor_coefficient(
    coeff: &SpectralField,
    freq: &Frequency,
    orientation: Orientation,
) -> Result<TwistedFactorization> {
    let log = coeff.log_field()?;
    // log gamma solves g(.+Omega) - g = +-(log coeff - <log coeff>)
    let (g, mean) = solve_projected(&log, freq)?;
    let g = match orientation {
        Orientation::Forward => g,
        Orientation::Backward => g.scale(-1.0),
    };
    Ok(TwistedFactorization {
        avg_coeff: mean.exp(),
        gamma: g.exp_field(),
        orientation,
    })
}

/// Solves `a_bar m(psi+Omega) - b_bar m(psi) = rhs` mode by mode.
///
/// In the equal-average branch the `k = 0` mode of `m` is left at zero and
/// the mean of `rhs` must vanish.
pub fn solve_constant_twisted(
    a_bar: f64,
    b_bar: f64,
    rhs: &SpectralField,
    freq: &Frequency,
) -> Result<SpectralField> {
    if !(a_bar > 0.0 && b_bar > 0.0) {
        return Err(KamError::NonPositiveCoefficient {
            min: a_bar.min(b_bar),
        });
    }
    let equal = Branch::classify(a_bar, b_bar).is_equal();
    if equal {
        let mean = rhs.average();
        if mean.abs() > MEAN_TOLERANCE * rhs.sup_norm().max(f64::MIN_POSITIVE) {
            return Err(KamError::UnsolvableResonant(mean));
        }
    }
    divide_modes(rhs, |k| {
        let zero = k.iter().all(|&ki| ki == 0);
        if zero && equal {
            None
        } else {
            Some(a_bar * Complex64::from_polar(1.0, freq.phase(k)) - b_bar)
        }
    })
}

/// The operator `v -> a v(.+Omega) - b v` with both coefficients factored.
#[derive(Clone, Debug)]
pub struct TwistedOperator {
    pub a: TwistedFactorization,
    pub b: TwistedFactorization,
    /// +1, or -1 when both coefficients were negative and have been flipped.
    pub sign: f64,
    branch: Branch,
    /// `gamma_a (gamma_b)_+`
    weight: SpectralField,
    /// `1 / (gamma_a gamma_b)`
    inv_gamma: SpectralField,
    freq: Frequency,
}

impl TwistedOperator {
    pub fn new(a: &SpectralField, b: &SpectralField, freq: &Frequency) -> Result<Self> {
        let (amin, amax) = (a.min_value(), a.max_value());
        let (bmin, bmax) = (b.min_value(), b.max_value());
        let sign = if amin > 0.0 && bmin > 0.0 {
            1.0
        } else if amax < 0.0 && bmax < 0.0 {
            -1.0
        } else if (amin > 0.0 && bmax < 0.0) || (amax < 0.0 && bmin > 0.0) {
            return Err(KamError::MixedSign);
        } else {
            return Err(KamError::NonPositiveCoefficient {
                min: amin.abs().min(amax.abs()).min(bmin.abs().min(bmax.abs())),
            });
        };
        let (a, b) = if sign > 0.0 {
            (a.clone(), b.clone())
        } else {
            (a.scale(-1.0), b.scale(-1.0))
        };
        let fa = factor_coefficient(&a, freq, Orientation::Forward)?;
        let fb = factor_coefficient(&b, freq, Orientation::Backward)?;
        let weight = fa.gamma.pointwise_mul(&fb.gamma.translate(&freq.omega))?;
        let inv_gamma = fa.gamma.pointwise_mul(&fb.gamma)?.map(|x| 1.0 / x);
        Ok(Self {
            branch: Branch::classify(fa.avg_coeff, fb.avg_coeff),
            a: fa,
            b: fb,
            sign,
            weight,
            inv_gamma,
            freq: freq.clone(),
        })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn weight(&self) -> &SpectralField {
        &self.weight
    }

    /// Linear functional whose vanishing makes `rhs` admissible in the
    /// equal-average branch: `<rhs gamma_a (gamma_b)_+>`.
    pub fn solvability(&self, rhs: &SpectralField) -> Result<f64> {
        Ok(self.sign * rhs.pointwise_mul(&self.weight)?.average())
    }

    /// Homogeneous solution `1/(gamma_a gamma_b)`; only exists in the
    /// equal-average branch.
    pub fn kernel(&self) -> Option<&SpectralField> {
        self.branch.is_equal().then_some(&self.inv_gamma)
    }

    /// A solution of `a v_+ - b v = rhs`. Unique when the averages differ;
    /// otherwise the one whose transformed unknown has zero mean.
    pub fn particular(&self, rhs: &SpectralField) -> Result<SpectralField> {
        let r = rhs.pointwise_mul(&self.weight)?.scale(self.sign);
        let m = if self.branch.is_equal() {
            // averages within tolerance: drop the residual mean and the k = 0 divisor
            let mean = r.average();
            if mean.abs() > MEAN_TOLERANCE * r.sup_norm().max(f64::MIN_POSITIVE) {
                return Err(KamError::UnsolvableResonant(mean));
            }
            self.divide_nonzero(&r)?
        } else {
            solve_constant_twisted(self.a.avg_coeff, self.b.avg_coeff, &r, &self.freq)?
        };
        m.pointwise_mul(&self.inv_gamma)
    }

    /// `m / (gamma_a gamma_b)` where `m` solves the transformed equation on
    /// the nonzero modes only and has `<m> = 0`. Every solution of
    /// `a v_+ - b v = rhs` is this plus `t / (gamma_a gamma_b)` with
    /// `(a_bar - b_bar) t = solvability(rhs)`.
    pub fn nonzero_part(&self, rhs: &SpectralField) -> Result<SpectralField> {
        let r = rhs.pointwise_mul(&self.weight)?.scale(self.sign);
        self.divide_nonzero(&r)?.pointwise_mul(&self.inv_gamma)
    }

    fn divide_nonzero(&self, r: &SpectralField) -> Result<SpectralField> {
        let (a_bar, b_bar) = (self.a.avg_coeff, self.b.avg_coeff);
        divide_modes(r, |k| {
            if k.iter().all(|&ki| ki == 0) {
                None
            } else {
                Some(a_bar * Complex64::from_polar(1.0, self.freq.phase(k)) - b_bar)
            }
        })
    }

    /// `1/(gamma_a gamma_b)`, the image of a constant transformed unknown.
    pub fn homogeneous(&self) -> &SpectralField {
        &self.inv_gamma
    }

    /// `a_bar - b_bar` of the sign-normalized coefficients.
    pub fn mean_divisor(&self) -> f64 {
        self.a.avg_coeff - self.b.avg_coeff
    }
}

/// Counterterm and zero-mean solution of a twisted cohomology equation.
#[derive(Clone, Debug)]
pub struct TwistedSolution {
    pub lambda: f64,
    pub v: SpectralField,
    pub branch: Branch,
    /// Scalar that had to be divided by to fix `lambda`.
    pub transversality: f64,
}

/// Solves `a v_+ - b v = lambda w + phi` for `(lambda, v)` with `<v> = 0`.
pub fn solve_twisted(
    a: &SpectralField,
    b: &SpectralField,
    phi: &SpectralField,
    w: &SpectralField,
    freq: &Frequency,
) -> Result<TwistedSolution> {
    let op = TwistedOperator::new(a, b, freq)?;
    solve_with_operator(&op, phi, w)
}

pub fn solve_with_operator(
    op: &TwistedOperator,
    phi: &SpectralField,
    w: &SpectralField,
) -> Result<TwistedSolution> {
    // v = P(phi) + lambda P(w) + t h, where P solves on the nonzero modes
    // and h = 1/(gamma_a gamma_b). The k = 0 mode gives
    //   solvability(phi) + lambda solvability(w) = (a_bar - b_bar) t
    // and the normalization <v> = 0 closes the 2x2 system. Solving for t
    // instead of lambda alone keeps the system well conditioned as the
    // averages approach each other.
    let v_phi = op.nonzero_part(phi)?;
    let v_w = op.nonzero_part(w)?;
    let h = op.homogeneous();
    let (s_phi, s_w) = (op.solvability(phi)?, op.solvability(w)?);
    let (d, h_avg) = (op.mean_divisor(), h.average());
    let det = s_w * h_avg + d * v_w.average();
    let transversality = det / h_avg;
    if transversality.abs() < TRANSVERSALITY_TOL {
        return Err(KamError::TransversalityLoss(transversality));
    }
    let lambda = -(s_phi * h_avg + d * v_phi.average()) / det;
    let t = (s_w * -v_phi.average() - v_w.average() * -s_phi) / det;
    let v = v_phi.axpy(lambda, &v_w)?.axpy(t, h)?;
    Ok(TwistedSolution {
        lambda,
        v,
        branch: op.branch(),
        transversality,
    })
}

/// `a v(.+Omega) - b v`
pub fn apply_twisted(
    a: &SpectralField,
    b: &SpectralField,
    v: &SpectralField,
    freq: &Frequency,
) -> Result<SpectralField> {
    a.pointwise_mul(&v.translate(&freq.omega))?
        .sub(&b.pointwise_mul(v)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohomology::diophantine_constant;
    use crate::field::Grid;
    use std::f64::consts::PI;

    fn freq() -> Frequency {
        diophantine_constant(&[(5f64.sqrt() - 1.0) / 2.0], 1.0, 100).unwrap()
    }

    fn g() -> Grid {
        Grid::new(1, 64).unwrap()
    }

    #[test]
    fn constant_coefficient_factorization() {
        let f = factor_coefficient(&SpectralField::constant(g(), 2.0), &freq(), Orientation::Forward)
            .unwrap();
        assert!((f.avg_coeff - 2.0).abs() < 1e-14);
        assert!(f.gamma.distance(&SpectralField::constant(g(), 1.0)).unwrap() < 1e-14);
    }

    #[test]
    fn mixed_signs_rejected() {
        let a = SpectralField::constant(g(), 1.0);
        let b = SpectralField::constant(g(), -1.0);
        assert!(matches!(
            TwistedOperator::new(&a, &b, &freq()),
            Err(KamError::MixedSign)
        ));
    }

    #[test]
    fn negative_pair_is_flipped() {
        let fr = freq();
        let a = SpectralField::from_fn(g(), |p| -1.2 - 0.1 * (2.0 * PI * p[0]).cos());
        let b = SpectralField::constant(g(), -1.0);
        let phi = SpectralField::from_fn(g(), |p| (2.0 * PI * p[0]).sin());
        let w = SpectralField::constant(g(), 1.0);
        let sol = solve_twisted(&a, &b, &phi, &w, &fr).unwrap();
        let res = apply_twisted(&a, &b, &sol.v, &fr)
            .unwrap()
            .sub(&phi.axpy(sol.lambda, &w).unwrap())
            .unwrap();
        assert!(res.sup_norm() < 1e-12, "{}", res.sup_norm());
        assert!(sol.v.average().abs() < 1e-13);
    }

    #[test]
    fn equal_branch_needs_solvable_rhs() {
        let r = SpectralField::from_fn(g(), |p| 0.2 + (2.0 * PI * p[0]).cos());
        assert!(matches!(
            solve_constant_twisted(1.0, 1.0, &r, &freq()),
            Err(KamError::UnsolvableResonant(_))
        ));
    }

    #[test]
    fn unit_coefficients_reduce_to_plain_cohomology() {
        let fr = freq();
        let one = SpectralField::constant(g(), 1.0);
        let phi = SpectralField::from_fn(g(), |p| 0.3 + (2.0 * PI * p[0]).cos());
        let sol = solve_twisted(&one, &one, &phi, &one, &fr).unwrap();
        assert_eq!(sol.branch, Branch::EqualAverage);
        assert!((sol.lambda + 0.3).abs() < 1e-14);
        let plain = crate::cohomology::solve_constant_cohomology(&phi.centered(), &fr).unwrap();
        assert!(sol.v.distance(&plain).unwrap() < 1e-14);
    }
}
