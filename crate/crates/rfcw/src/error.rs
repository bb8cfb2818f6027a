use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("second-order transition near m = {m:.6} (susceptibility {chi:.3e} from 1)")]
    SecondOrderTransition { m: f64, chi: f64 },
    #[error("no deeper minimum than m = {0:.6}")]
    NoDeeperMinimum(f64),
    #[error("not a saddle: susceptibility {0:.6} does not exceed 1")]
    NotASaddle(f64),
    #[error("prefactor equation has no negative solution (condition value {0:.6})")]
    NoNegativeSolution(f64),
    #[error("sets are not connected (infinite resistance)")]
    Disconnected,
    #[error("log-conductance range {0:.1} exceeds floating point range")]
    DynamicRange(f64),
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the model or its parameters rather than by the program.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Domain(_)
                | Error::SecondOrderTransition { .. }
                | Error::NoDeeperMinimum(_)
                | Error::NotASaddle(_)
                | Error::NoNegativeSolution(_)
                | Error::Disconnected
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
