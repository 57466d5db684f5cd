use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("outside the domain of validity: {0}")]
    OutOfDomain(String),

    #[error("frequency band out of range: {0}")]
    OutOfBand(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("ode solver failed at x = {x}: {reason} ({steps} steps, last step {last_step:e})")]
    Solver {
        x: f64,
        reason: String,
        steps: usize,
        last_step: f64,
    },

    #[error("solution blew up at t = {time} (last finite state at t = {last_valid_time})")]
    BlowUp {
        time: f64,
        last_valid_time: f64,
        last_valid: Vec<f64>,
    },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
