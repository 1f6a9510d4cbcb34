use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge: {0}")]
    NonConvergence(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("insufficient samples: got {got}, need at least {min}")]
    InsufficientSamples { got: usize, min: usize },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("root finding did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("wrong regime: {0}")]
    Regime(String),

    #[error("no optimal boundary found: {message}")]
    NoBoundaryFound {
        message: String,
        /// Sampled (z, G(z)/V1(z)) pairs, kept for diagnosis.
        ratio_curve: Vec<(f64, f64)>,
    },

    #[error("cache format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by parameters or regime rather than numerics.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_) | Error::Domain(_) | Error::Regime(_) | Error::InsufficientSamples { .. }
        )
    }
}
