use thiserror::Error;

/// Errors produced by the numerical kernels, designs, solvers and protocols.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("channel of sensor {sensor} is degenerate: {reason}")]
    DegenerateChannel { sensor: usize, reason: String },

    #[error("sum channel is degenerate: {0}")]
    DegenerateSumChannel(String),

    #[error("equalized channel of sensor {sensor} is not invertible (condition number {condition:e})")]
    NonInvertible { sensor: usize, condition: f64 },

    #[error("degenerate multicast instance: {0}")]
    DegenerateInstance(String),

    #[error("ADMM did not converge in {iterations} iterations (primal residual {primal:e}, dual residual {dual:e})")]
    Convergence { iterations: usize, primal: f64, dual: f64 },

    #[error("measurement {value} of sensor {sensor} is outside the domain of {function}")]
    Domain {
        sensor: usize,
        function: String,
        value: f64,
    },

    #[error("feedback protocol corrupted: {0}")]
    ProtocolCorruption(String),

    #[error("malformed fixture: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Re-tags a degenerate-channel or non-invertible error with the sensor index it came from.
    pub(crate) fn at_sensor(self, k: usize) -> Self {
        match self {
            Error::DegenerateChannel { reason, .. } => Error::DegenerateChannel { sensor: k, reason },
            Error::NonInvertible { condition, .. } => Error::NonInvertible { sensor: k, condition },
            other => other,
        }
    }
}
