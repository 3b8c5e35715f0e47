//! Spectral solver for quasi-periodic equilibria of resonant quasi-periodic
//! Frenkel-Kontorova models.
//!
//! The equilibrium equation
//!
//! ```text
//! E[v, sigma, lambda] = v(psi+Omega) + v(psi-Omega) - 2 v(psi)
//!                       + W((psi, eta) + beta v(psi)) + sigma v(psi) + lambda = 0
//! ```
//!
//! is solved together with the factorization equation
//!
//! ```text
//! F[v, sigma, c] = (-c(psi) + 2 - d_beta W((psi, eta) + beta v(psi)) - sigma) c(psi+Omega) - 1 = 0
//! ```
//!
//! by a quasi-Newton iteration whose linear steps reduce to first-order
//! difference equations with non-constant coefficients.

pub mod cohomology;
pub mod error;
pub mod field;
pub mod io;
pub mod lindstedt;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod twisted;

pub use cohomology::{diophantine_constant, solve_constant_cohomology, Frequency};
pub use error::{ErrorClass, KamError, Result};
pub use field::{AnalyticNormCertificate, Grid, SpectralField, SyncState};
pub use lindstedt::{expand_series, evaluate_series, PerturbativeSeries};
pub use model::{ModelConfig, Potential, SolverState};
pub use solver::{newton_step, run_kam, KamOptions, StepReport};
