use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph size {n} out of range for {kind}: {reason}")]
    Size {
        kind: &'static str,
        n: usize,
        reason: &'static str,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("out of range: {0}")]
    Range(String),
    #[error("type code {code} at site {site} is not valid for the {model} process")]
    InvalidCode {
        model: &'static str,
        site: usize,
        code: u8,
    },
    #[error("front left the simulation window at t = {time:.4}; widen the window")]
    Truncation { time: f64 },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("linear solve failed, residual {residual:.3e}")]
    Numerical { residual: f64 },
    #[error("no sign change of the mean increment in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("{0} is not supported by this engine")]
    Unsupported(String),
    #[error("state space of {states} states exceeds the limit of {limit}")]
    Memory { states: usize, limit: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
