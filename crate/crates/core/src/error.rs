use thiserror::Error;

/// Every failure the solver stack can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KamError {
    #[error("grid size {0} is not a power of two >= 4")]
    InvalidGrid(usize),
    #[error("unsupported torus dimension {0}")]
    InvalidDimension(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("coefficient not strictly positive (min grid value {min:.3e})")]
    NonPositiveCoefficient { min: f64 },
    #[error("coefficients of a twisted equation have mixed signs")]
    MixedSign,
    #[error("imaginary residue {0:.3e} exceeds tolerance")]
    ImaginaryResidue(f64),
    #[error("resonance within cutoff: |k.omega - m| = {gap:.3e} at k = {k:?}, m = {m}")]
    ResonanceDetected { k: Vec<i64>, m: i64, gap: f64 },
    #[error("right-hand side has mean {mean:.3e}, tolerance {tol:.3e}")]
    NonzeroMean { mean: f64, tol: f64 },
    #[error("small divisor {0:.3e} below underflow threshold")]
    SmallDivisorUnderflow(f64),
    #[error("equal-average twisted equation with unsolvable right-hand side (mean {0:.3e})")]
    UnsolvableResonant(f64),
    #[error("transversality lost: denominator {0:.3e}")]
    TransversalityLoss(f64),
    #[error("composition leaves the potential's domain: {0}")]
    RangeViolation(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("residual stagnated at {residual:.3e} after {iterations} iterations")]
    NoProgress { iterations: usize, residual: f64 },
    #[error("restart {index} converged {distance:.3e} away from the reference solution")]
    UniquenessViolation { index: usize, distance: f64 },
    #[error("dense system is singular")]
    SingularSystem,
    #[error("eta spectrum tail {0:.3e} too large for Fourier interpolation")]
    InterpolationUnderResolved(f64),
    #[error("series coefficients grow too fast at order {order} (ratio {ratio:.3e})")]
    SeriesDivergence { order: usize, ratio: f64 },
    #[error("non-degeneracy check failed: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl KamError {
    /// Coarse grouping used for exit statuses and machine-readable reports.
    pub fn class(&self) -> ErrorClass {
        use KamError::*;
        match self {
            InvalidGrid(_) | InvalidDimension(_) | ShapeMismatch(_) | InvalidInput(_) => {
                ErrorClass::Input
            }
            NonPositiveCoefficient { .. }
            | MixedSign
            | ResonanceDetected { .. }
            | NonzeroMean { .. }
            | SmallDivisorUnderflow(_)
            | UnsolvableResonant(_)
            | TransversalityLoss(_)
            | RangeViolation(_)
            | Degenerate(_)
            | InterpolationUnderResolved(_) => ErrorClass::Precondition,
            MaxIterations { .. } | NoProgress { .. } | SeriesDivergence { .. } => {
                ErrorClass::Convergence
            }
            ImaginaryResidue(_) | UniquenessViolation { .. } | SingularSystem => {
                ErrorClass::Internal
            }
        }
    }

    pub fn name(&self) -> &'static str {
        use KamError::*;
        match self {
            InvalidGrid(_) => "InvalidGrid",
            InvalidDimension(_) => "InvalidDimension",
            ShapeMismatch(_) => "ShapeMismatch",
            NonPositiveCoefficient { .. } => "NonPositiveCoefficient",
            MixedSign => "MixedSign",
            ImaginaryResidue(_) => "ImaginaryResidue",
            ResonanceDetected { .. } => "ResonanceDetected",
            NonzeroMean { .. } => "NonzeroMean",
            SmallDivisorUnderflow(_) => "SmallDivisorUnderflow",
            UnsolvableResonant(_) => "UnsolvableResonant",
            TransversalityLoss(_) => "TransversalityLoss",
            RangeViolation(_) => "RangeViolation",
            MaxIterations { .. } => "MaxIterations",
            NoProgress { .. } => "NoProgress",
            UniquenessViolation { .. } => "UniquenessViolation",
            SingularSystem => "SingularSystem",
            InterpolationUnderResolved(_) => "InterpolationUnderResolved",
            SeriesDivergence { .. } => "SeriesDivergence",
            Degenerate(_) => "Degenerate",
            InvalidInput(_) => "InvalidInput",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Precondition,
    Convergence,
    Internal,
}

pub type Result<T> = std::result::Result<T, KamError>;
