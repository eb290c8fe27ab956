use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Evaluation outside the domain of a kernel or quadrature rule.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid branching kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid initial datum: {0}")]
    InvalidDatum(String),

    #[error("datum calibration failed after {iterations} iterations (mass residual {mass_residual:e}, compatibility residual {compat_residual:e})")]
    Calibration { iterations: usize, mass_residual: f64, compat_residual: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    /// The inner Picard loop of a time step did not settle.
    #[error("inner iteration stalled at step {step} (t = {t}) after {iterations} iterations (last change {last_change:e}); use a smaller dt")]
    StepSize { step: usize, t: f64, iterations: usize, last_change: f64 },

    /// `|u(0, t)|` fell below the floor, so the velocity quotient is unreliable.
    #[error("boundary flux degenerate: min |g| = {min_g} below floor {floor} at t = {t}; shrink the horizon")]
    BoundaryDegeneracy { min_g: f64, floor: f64, t: f64 },

    #[error("fixed point not reached after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence { iterations: usize, last_residual: f64, history: Vec<f64> },

    #[error("degenerate datum: {0}")]
    DegenerateDatum(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
