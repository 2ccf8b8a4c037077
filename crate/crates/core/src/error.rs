//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by grid construction, transforms, solvers and analyses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("time grid violates the anti-aliasing rule N_t >= 2H+2: got N_t={n_t} for H={h}")]
    GridTooCoarse { n_t: usize, h: usize },

    #[error("coefficients are not Hermitian-symmetric (max deviation {deviation:.3e}); cannot reconstruct a real signal")]
    NotHermitian { deviation: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unsupported distribution family `{family}`; supported families: uniform, normal, beta4")]
    UnsupportedFamily { family: String },

    #[error("quadrature eigensolver failed for the {n_g}-point rule (tridiagonal entries spanning {scale:.3e})")]
    QuadratureEigenFailure { n_g: usize, scale: f64 },

    #[error("non-finite system residual at time node {time_index}{}", .quad_node.map(|z| format!(" (quadrature node {z})")).unwrap_or_default())]
    NonFiniteResidual {
        time_index: usize,
        quad_node: Option<usize>,
    },

    #[error("Newton did not converge in {max_iter} iterations (residual {residual_norm:.3e})")]
    MaxIterations {
        max_iter: usize,
        residual_norm: f64,
        last: Vec<f64>,
    },

    #[error("Jacobian numerically singular (condition estimate {condition:.3e})")]
    SingularJacobian { condition: f64, last: Vec<f64> },

    #[error("line search stalled with residual {residual_norm:.3e}")]
    LineSearchStalled { residual_norm: f64, last: Vec<f64> },

    #[error("step size underflow at t={t:.6e} (h={h:.3e}); system too stiff for the explicit integrator — relax tolerances or review the model")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("no stable periodicity detected: relative spread of period estimates {spread:.3e} exceeds {threshold:.3e}")]
    PeriodicityNotDetected { spread: f64, threshold: f64 },

    #[error("unknown system `{0}`; registered systems: duffing, vanderpol")]
    UnknownSystem(String),

    #[error("system `{system}` has no parameter `{name}`")]
    UnknownParameter { system: &'static str, name: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("continuation step fell below the minimum {min_step:.3e} at omega={omega:.6}")]
    ContinuationStalled { omega: f64, min_step: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
