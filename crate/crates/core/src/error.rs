use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An operation was called with an input that violates its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A strategy or run mode was combined with an incompatible configuration.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The restart loop hit its round cap before any Bell outcome was announced.
    #[error("no successful Bell measurement after {rounds} rounds")]
    Exhausted { rounds: u64 },

    /// A protocol message arrived in the wrong phase.
    #[error("protocol message `{message}` not allowed in phase {phase}")]
    OutOfOrder { message: &'static str, phase: &'static str },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
