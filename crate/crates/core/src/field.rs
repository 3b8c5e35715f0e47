//! Real-analytic periodic functions on the torus `T^dim`, held on a uniform
//! grid and as Fourier coefficients.
//!
//! A [`SpectralField`] is immutable. It is created from one representation
//! and lazily materializes the other through an FFT the first time it is
//! asked for, so every operation below is a pure function of its inputs.
//!
//! Coefficients use the convention `v(psi) = sum_k v_k exp(2 pi i k.psi)`,
//! so `v_0` is the grid average. Modes are stored in FFT order: index `i`
//! along an axis carries frequency `i` for `i < N/2` and `i - N` otherwise.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{KamError, Result};

/// Relative size of the imaginary part tolerated when a complex grid is
/// converted into a real field.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Values at or below this are treated as non-positive by `log_field`.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Shape of a uniform periodic lattice: `size` points along each of `dim` axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub dim: usize,
    pub size: usize,
}

impl Grid {
    pub fn new(dim: usize, size: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(KamError::InvalidDimension(dim));
        }
        if size < 4 || !size.is_power_of_two() {
            return Err(KamError::InvalidGrid(size));
        }
        Ok(Self { dim, size })
    }

    pub fn len(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest retained |k_i| under the 2/3 dealiasing rule.
    pub fn cutoff(&self) -> i64 {
        (self.size / 3) as i64
    }

    /// Frequency carried by position `i` along one axis.
    #[inline]
    pub fn freq(&self, i: usize) -> i64 {
        if i < self.size / 2 {
            i as i64
        } else {
            i as i64 - self.size as i64
        }
    }

    /// Position along one axis that carries frequency `k`, if representable.
    #[inline]
    pub fn slot(&self, k: i64) -> Option<usize> {
        let half = (self.size / 2) as i64;
        if k >= -half && k < half {
            Some(k.rem_euclid(self.size as i64) as usize)
        } else {
            None
        }
    }

    /// Multi-index (row-major, last axis fastest) of a flat position.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for axis in (0..self.dim).rev() {
            idx[axis] = flat % self.size;
            flat /= self.size;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.size + i)
    }

    /// Frequency vector of a flat coefficient position.
    pub fn mode(&self, flat: usize) -> Vec<i64> {
        self.unravel(flat).into_iter().map(|i| self.freq(i)).collect()
    }

    /// Flat coefficient position of a frequency vector.
    pub fn mode_index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let mut flat = 0;
        for &ki in k {
            flat = flat * self.size + self.slot(ki)?;
        }
        Some(flat)
    }

    /// Flat position of the mode `-k` for the mode stored at `flat`.
    pub fn conjugate_index(&self, flat: usize) -> usize {
        let idx: Vec<usize> = self
            .unravel(flat)
            .into_iter()
            .map(|i| (self.size - i) % self.size)
            .collect();
        self.ravel(&idx)
    }

    /// True if any component of the mode sits on the Nyquist frequency.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        self.unravel(flat).iter().any(|&i| i == self.size / 2)
    }

    /// Lattice point `psi` (in [0,1)^dim) of a flat grid position.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .into_iter()
            .map(|i| i as f64 / self.size as f64)
            .collect()
    }
}

/// In-place multidimensional FFT over a row-major array. Unnormalized.
pub(crate) fn fft_nd(data: &mut [Complex64], grid: Grid, direction: FftDirection) {
    let n = grid.size;
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
    let total = data.len();
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // last axis is contiguous
    for line in data.chunks_exact_mut(n) {
        fft.process_with_scratch(line, &mut scratch);
    }
    if grid.dim == 1 {
        return;
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..grid.dim - 1 {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        let block = stride * n;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let start = outer + inner;
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = data[start + j * stride];
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (j, b) in buf.iter().enumerate() {
                    data[start + j * stride] = *b;
                }
            }
        }
    }
}

/// Which representations of a field have been materialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyncState {
    GridOnly,
    SpectrumOnly,
    Both,
}

/// Certified upper bound `sum_k |v_k| exp(2 pi |k|_1 rho)` for the sup norm
/// of a field on the complex strip of half-width `rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticNormCertificate {
    pub rho: f64,
    pub bound: f64,
    pub overflow: bool,
}

#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    values: OnceLock<Vec<f64>>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl SpectralField {
    pub fn from_grid(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KamError::ShapeMismatch(format!(
                "{} grid values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        let field = Self {
            grid,
            values: OnceLock::new(),
            coeffs: OnceLock::new(),
        };
        let _ = field.values.set(values);
        Ok(field)
    }

    /// Builds a field from coefficients, enforcing Hermitian symmetry by
    /// averaging each mode with the conjugate of its mirror.
    pub fn from_coefficients(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(KamError::ShapeMismatch(format!(
                "{} coefficients for a grid of {}",
                coeffs.len(),
                grid.len()
            )));
        }
        let sym: Vec<Complex64> = (0..coeffs.len())
            .map(|i| 0.5 * (coeffs[i] + coeffs[grid.conjugate_index(i)].conj()))
            .collect();
        Ok(Self::from_symmetric_coefficients(grid, sym))
    }

    fn from_symmetric_coefficients(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        let field = Self {
            grid,
            values: OnceLock::new(),
            coeffs: OnceLock::new(),
        };
        let _ = field.coeffs.set(coeffs);
        field
    }

    /// Converts complex grid samples into a real field, rejecting samples
    /// whose imaginary part is not negligible.
    pub fn from_complex_grid(grid: Grid, values: &[Complex64]) -> Result<Self> {
        let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let imag = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if imag > IMAG_RESIDUE_TOL * scale {
            return Err(KamError::ImaginaryResidue(imag / scale));
        }
        Self::from_grid(grid, values.iter().map(|z| z.re).collect())
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::from_grid(grid, values).expect("length matches grid")
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        coeffs[0] = Complex64::new(c, 0.0);
        let field = Self {
            grid,
            values: OnceLock::new(),
            coeffs: OnceLock::new(),
        };
        let _ = field.values.set(vec![c; grid.len()]);
        let _ = field.coeffs.set(coeffs);
        field
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn size(&self) -> usize {
        self.grid.size
    }

    pub fn sync_state(&self) -> SyncState {
        match (self.values.get().is_some(), self.coeffs.get().is_some()) {
            (true, true) => SyncState::Both,
            (true, false) => SyncState::GridOnly,
            _ => SyncState::SpectrumOnly,
        }
    }

    pub fn values(&self) -> &[f64] {
        self.values.get_or_init(|| {
            let mut data = self.coeffs.get().expect("one representation").clone();
            fft_nd(&mut data, self.grid, FftDirection::Inverse);
            data.into_iter().map(|z| z.re).collect()
        })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| {
            let mut data: Vec<Complex64> = self
                .values
                .get()
                .expect("one representation")
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect();
            fft_nd(&mut data, self.grid, FftDirection::Forward);
            let norm = 1.0 / self.grid.len() as f64;
            data.iter_mut().for_each(|z| *z *= norm);
            data
        })
    }

    /// Coefficient of mode `k`; zero for modes outside the grid band.
    pub fn coefficient(&self, k: &[i64]) -> Complex64 {
        match self.grid.mode_index(k) {
            Some(i) => self.coefficients()[i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Returns a copy with both representations materialized.
    pub fn synchronize(&self) -> Self {
        self.values();
        self.coefficients();
        self.clone()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(KamError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Grid-space map followed by dealiasing.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values().iter().map(|&x| f(x)).collect();
        Self::from_grid(self.grid, values).unwrap().dealias()
    }

    /// Grid-space binary operation followed by dealiasing.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_shape(other)?;
        let values = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Self::from_grid(self.grid, values)?.dealias())
    }

    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |x, y| x * y)
    }

    /// Pointwise quotient; the divisor must not vanish on the grid.
    pub fn pointwise_div(&self, other: &Self) -> Result<Self> {
        let min = other.values().iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        if min <= POSITIVITY_FLOOR {
            return Err(KamError::NonPositiveCoefficient { min });
        }
        self.zip_map(other, |x, y| x / y)
    }

    fn linear(&self, other: &Self, a: f64, b: f64) -> Result<Self> {
        self.check_shape(other)?;
        let out = Self {
            grid: self.grid,
            values: OnceLock::new(),
            coeffs: OnceLock::new(),
        };
        if let (Some(x), Some(y)) = (self.coeffs.get(), other.coeffs.get()) {
            let _ = out
                .coeffs
                .set(x.iter().zip(y).map(|(p, q)| a * p + b * q).collect());
        }
        if let (Some(x), Some(y)) = (self.values.get(), other.values.get()) {
            let _ = out
                .values
                .set(x.iter().zip(y).map(|(p, q)| a * p + b * q).collect());
        }
        if out.coeffs.get().is_none() && out.values.get().is_none() {
            let x = self.coefficients();
            let y = other.coefficients();
            let _ = out
                .coeffs
                .set(x.iter().zip(y).map(|(p, q)| a * p + b * q).collect());
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.linear(other, 1.0, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear(other, 1.0, -1.0)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.linear(other, 1.0, s)
    }

    pub fn scale(&self, s: f64) -> Self {
        let out = Self {
            grid: self.grid,
            values: OnceLock::new(),
            coeffs: OnceLock::new(),
        };
        if let Some(c) = self.coeffs.get() {
            let _ = out.coeffs.set(c.iter().map(|z| z * s).collect());
        }
        if let Some(v) = self.values.get() {
            let _ = out.values.set(v.iter().map(|x| x * s).collect());
        }
        out
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let out = Self {
            grid: self.grid,
            values: OnceLock::new(),
            coeffs: OnceLock::new(),
        };
        if let Some(c) = self.coeffs.get() {
            let mut c = c.clone();
            c[0] += s;
            let _ = out.coeffs.set(c);
        }
        if let Some(v) = self.values.get() {
            let _ = out.values.set(v.iter().map(|x| x + s).collect());
        }
        out
    }

    /// Mean over the torus (the real part of the `k = 0` coefficient).
    pub fn average(&self) -> f64 {
        self.coefficients()[0].re
    }

    /// `f - <f>`
    pub fn centered(&self) -> Self {
        self.add_scalar(-self.average())
    }

    /// Translation `psi -> psi + shift`, exact in Fourier space. Nyquist
    /// modes have no real-valued translate and are dropped.
    pub fn translate(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.grid.dim, "shift length must equal dim");
        let grid = self.grid;
        let coeffs = self
            .coefficients()
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                if grid.is_nyquist(i) {
                    return Complex64::new(0.0, 0.0);
                }
                let phase: f64 = grid
                    .mode(i)
                    .iter()
                    .zip(shift)
                    .map(|(&k, &s)| k as f64 * s)
                    .sum();
                z * Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .collect();
        Self::from_symmetric_coefficients(grid, coeffs)
    }

    /// Zeroes every mode with some |k_i| > N/3.
    pub fn dealias(&self) -> Self {
        let grid = self.grid;
        let cut = grid.cutoff();
        let coeffs = self
            .coefficients()
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                if grid.mode(i).iter().any(|k| k.abs() > cut) {
                    Complex64::new(0.0, 0.0)
                } else {
                    z
                }
            })
            .collect();
        Self::from_symmetric_coefficients(grid, coeffs)
    }

    /// Fraction of the spectral energy carried by modes beyond the
    /// dealiasing cutoff. Zero for an identically vanishing field.
    pub fn tail_fraction(&self) -> f64 {
        let grid = self.grid;
        let cut = grid.cutoff();
        let (mut tail, mut total) = (0.0, 0.0);
        for (i, z) in self.coefficients().iter().enumerate() {
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

    /// Spectral interpolation (or truncation) onto a grid of another size.
    pub fn resample(&self, size: usize) -> Result<Self> {
        let target = Grid::new(self.grid.dim, size)?;
        if target == self.grid {
            return Ok(self.clone());
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); target.len()];
        let small = self.grid.size.min(size) as i64;
        let src = self.coefficients();
        for (i, &z) in src.iter().enumerate() {
            let k = self.grid.mode(i);
            if k.iter().any(|&ki| ki <= -small / 2 || ki >= small / 2) {
                continue;
            }
            coeffs[target.mode_index(&k).unwrap()] = z;
        }
        Ok(Self::from_symmetric_coefficients(target, coeffs))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values().iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise logarithm; requires a strictly positive field.
    pub fn log_field(&self) -> Result<Self> {
        let min = self.min_value();
        if min.is_nan() || min <= POSITIVITY_FLOOR {
            return Err(KamError::NonPositiveCoefficient { min });
        }
        Ok(self.map(f64::ln))
    }

    pub fn exp_field(&self) -> Self {
        self.map(f64::exp)
    }

    pub fn analytic_norm_bound(&self, rho: f64) -> AnalyticNormCertificate {
        let grid = self.grid;
        let rho = rho.max(0.0);
        let bound: f64 = self
            .coefficients()
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let k1: i64 = grid.mode(i).iter().map(|k| k.abs()).sum();
                z.norm() * (2.0 * PI * k1 as f64 * rho).exp()
            })
            .sum();
        AnalyticNormCertificate {
            rho,
            bound,
            overflow: !bound.is_finite(),
        }
    }

    /// Sup-norm distance between two fields on the grid.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .values()
            .iter()
            .zip(other.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(n: usize) -> Grid {
        Grid::new(1, n).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(Grid::new(1, 12), Err(KamError::InvalidGrid(12)));
        assert_eq!(Grid::new(1, 2), Err(KamError::InvalidGrid(2)));
        assert_eq!(Grid::new(0, 8), Err(KamError::InvalidDimension(0)));
    }

    #[test]
    fn constant_has_single_mode() {
        let f = SpectralField::from_grid(g1(8), vec![1.0; 8]).unwrap();
        let c = f.coefficients();
        assert!((c[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn cosine_splits_into_two_halves() {
        let f = SpectralField::from_fn(g1(8), |p| (2.0 * PI * p[0]).cos());
        for (i, z) in f.coefficients().iter().enumerate() {
            let k = g1(8).freq(i);
            let want = if k.abs() == 1 { 0.5 } else { 0.0 };
            assert!((z - Complex64::new(want, 0.0)).norm() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn lazy_sync_state() {
        let f = SpectralField::from_fn(g1(16), |p| p[0].sin());
        assert_eq!(f.sync_state(), SyncState::GridOnly);
        let s = f.synchronize();
        assert_eq!(s.sync_state(), SyncState::Both);
    }

    #[test]
    fn cosine_squared() {
        let c = SpectralField::from_fn(g1(32), |p| (2.0 * PI * p[0]).cos());
        let prod = c.pointwise_mul(&c).unwrap();
        let want = SpectralField::from_fn(g1(32), |p| 0.5 + 0.5 * (4.0 * PI * p[0]).cos());
        assert!(prod.distance(&want).unwrap() < 1e-14);
    }

    #[test]
    fn log_rejects_negative() {
        let mut v = vec![1.0; 8];
        v[3] = -0.5;
        let f = SpectralField::from_grid(g1(8), v).unwrap();
        assert!(matches!(
            f.log_field(),
            Err(KamError::NonPositiveCoefficient { .. })
        ));
    }

    #[test]
    fn log_exp_of_trivial() {
        let one = SpectralField::constant(g1(16), 1.0);
        assert!(one.log_field().unwrap().sup_norm() < 1e-16);
        let zero = SpectralField::zeros(g1(16));
        assert!(zero.exp_field().distance(&one).unwrap() < 1e-16);
    }

    #[test]
    fn norm_certificate_values() {
        let two = SpectralField::constant(g1(16), 2.0);
        assert!((two.analytic_norm_bound(0.3).bound - 2.0).abs() < 1e-15);
        let c = SpectralField::from_fn(g1(16), |p| (2.0 * PI * p[0]).cos());
        let b = c.analytic_norm_bound(0.1).bound;
        assert!((b - (0.2 * PI).exp()).abs() < 1e-13);
        assert!((b - 1.8745).abs() < 1e-4);
    }

    #[test]
    fn two_dimensional_modes() {
        let g = Grid::new(2, 8).unwrap();
        let f = SpectralField::from_fn(g, |p| (2.0 * PI * (p[0] + 2.0 * p[1])).cos());
        let c = f.coefficient(&[1, 2]);
        assert!((c - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((f.coefficient(&[-1, -2]) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(f.coefficient(&[1, -2]).norm() < 1e-14);
        let back = SpectralField::from_coefficients(g, f.coefficients().to_vec()).unwrap();
        assert!(back.distance(&f).unwrap() < 1e-14);
    }

    #[test]
    fn translate_single_mode() {
        let omega = 0.618_033_988_749_895;
        let f = SpectralField::from_fn(g1(16), |p| (2.0 * PI * p[0]).cos());
        let t = f.translate(&[omega]);
        let z = t.coefficient(&[1]);
        let want = Complex64::from_polar(0.5, 2.0 * PI * omega);
        assert!((z - want).norm() < 1e-15);
        assert!(f.translate(&[0.0]).distance(&f).unwrap() < 1e-15);
    }

    #[test]
    fn resample_roundtrip() {
        let f = SpectralField::from_fn(g1(32), |p| (2.0 * PI * p[0]).sin().exp()).dealias();
        let up = f.resample(64).unwrap();
        let down = up.resample(32).unwrap();
        assert!(down.distance(&f).unwrap() < 1e-14);
        // point values agree on the shared lattice
        for i in 0..32 {
            assert!((up.values()[2 * i] - f.values()[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn mismatched_shapes() {
        let a = SpectralField::zeros(g1(8));
        let b = SpectralField::zeros(g1(16));
        assert!(matches!(a.pointwise_mul(&b), Err(KamError::ShapeMismatch(_))));
    }

    #[test]
    fn complex_grid_residue() {
        let g = g1(8);
        let ok: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 1e-14)).collect();
        assert!(SpectralField::from_complex_grid(g, &ok).is_ok());
        let bad: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 1e-3)).collect();
        assert!(matches!(
            SpectralField::from_complex_grid(g, &bad),
            Err(KamError::ImaginaryResidue(_))
        ));
    }
}
