use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {op} got {left:?} and {right:?}")]
    DimensionMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("condition number too large: sigma_min * kappa = {scaled_min:.6e} < sigma_max = {sigma_max:.6e}")]
    IllConditioned { scaled_min: f64, sigma_max: f64 },

    #[error("{method} did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    NoConvergence { method: &'static str, sweeps: usize, residual: f64 },

    #[error("loss diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("post-selection amplitude {0:.3e} is degenerate")]
    DegeneratePostSelection(f64),

    #[error("schedule file: field `{field}`: {msg}")]
    Schedule { field: String, msg: String },

    #[error("unknown backend `{0}`")]
    UnknownBackend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::Diverged { .. } | Error::DegeneratePostSelection(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
