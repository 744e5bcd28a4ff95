use thiserror::Error;

/// Errors raised while compiling, simulating or training a chemical neuron.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or malformed.
    #[error("invalid configuration for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// An input violated a precondition of the operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The integrator produced a NaN or infinite concentration.
    #[error("integration failed at t = {time}: species `{species}` became non-finite")]
    NonFinite { species: String, time: f64 },

    /// The integrator ran out of steps before reaching the final time or a steady state.
    #[error("integration hit the step limit ({max_steps}) at t = {time}")]
    StepLimit { max_steps: usize, time: f64 },

    /// A training step failed; carries the position in the sample stream.
    #[error("training failed at epoch {epoch}, sample {sample}: {source}")]
    TrainingStep {
        epoch: usize,
        sample: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::StepLimit { .. } => true,
            Error::TrainingStep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
