//! Error type shared across the crate.

use alloc::string::String;
use core::fmt;

/// Everything that can go wrong inside the laboratory.
#[derive(Debug, Clone, PartialEq)]
pub enum EdError {
    /// A lattice or experiment specification violates an invariant.
    InvalidSpec(String),
    /// The configuration count exceeds the configured cap.
    Capacity { configs: u128, cap: u64 },
    /// Vector lengths do not match the configuration space.
    LengthMismatch { expected: usize, got: usize },
    /// An index (site, particle, component, level) is out of range.
    IndexOutOfRange(String),
    /// Operation hit a zero of `rho` where the geometry is singular.
    SingularSupport { index: usize },
    /// A kernel failed the Hermiticity check.
    NonHermitian { residual: f64 },
    /// Entropy maximization did not converge (infeasible constraints).
    NoConvergence { residual: f64 },
    /// The requested time step is too large for the discrete kernel.
    StepSize(String),
    /// An iterative linear solve failed to reach tolerance.
    SolverFailure { residual: f64, iterations: usize },
    /// A gauge function is not commensurate with the amplitude grid.
    NonCommensurate { site: usize, value: f64 },
    /// Physical-subspace projection found (numerically) nothing.
    EmptyPhysicalSubspace { norm: f64 },
    /// Generic numerical failure with context.
    Numerical(String),
}

impl fmt::Display for EdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdError::InvalidSpec(msg) => write!(f, "invalid spec: {msg}"),
            EdError::Capacity { configs, cap } => write!(
                f,
                "configuration count K = {configs} exceeds max_configs = {cap}"
            ),
            EdError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            EdError::IndexOutOfRange(msg) => write!(f, "index out of range: {msg}"),
            EdError::SingularSupport { index } => write!(
                f,
                "singular support: rho vanishes at config {index} with nonzero tangent"
            ),
            EdError::NonHermitian { residual } => {
                write!(f, "kernel is not Hermitian (residual {residual:e})")
            }
            EdError::NoConvergence { residual } => write!(
                f,
                "entropy maximization did not converge (constraint residual {residual:e})"
            ),
            EdError::StepSize(msg) => write!(f, "time step too large: {msg}"),
            EdError::SolverFailure {
                residual,
                iterations,
            } => write!(
                f,
                "linear solve failed: residual {residual:e} after {iterations} iterations"
            ),
            EdError::NonCommensurate { site, value } => write!(
                f,
                "gauge function not commensurate with amplitude grid at site {site}: {value}"
            ),
            EdError::EmptyPhysicalSubspace { norm } => write!(
                f,
                "projection onto the physical subspace annihilated the state (norm {norm:e}); \
                 check the charge sector against the compact amplitude grid"
            ),
            EdError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EdError {}

pub type Result<T> = core::result::Result<T, EdError>;
