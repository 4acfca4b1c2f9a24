use thiserror::Error;
use xos_core::XosError;

/// Process exit codes. These are part of the command-line contract.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const INVALID_INPUT: u8 = 1;
    pub const UNKNOWN_CLASS: u8 = 2;
    pub const SOLVER_FAILURE: u8 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid document: {0}")]
    Invalid(String),

    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: XosError,
    },

    #[error(transparent)]
    Core(#[from] XosError),

    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        let core = match self {
            CliError::Scenario { source, .. } => source,
            CliError::Core(e) => e,
            _ => return exit::INVALID_INPUT,
        };
        match core {
            XosError::NoConvergence { .. }
            | XosError::PathNoConvergence { .. }
            | XosError::LeverageBoundViolated { .. } => exit::SOLVER_FAILURE,
            XosError::NonContractiveSystem => exit::UNKNOWN_CLASS,
            _ => exit::INVALID_INPUT,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
