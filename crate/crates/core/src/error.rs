use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied arguments that violate an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("piecewise budget of {budget} segments is too small, need at least {required}")]
    BudgetTooSmall { budget: usize, required: usize },

    #[error("no wells found in potential")]
    NoWells,

    #[error("quadrature did not converge: achieved {achieved:e}, wanted {wanted:e}")]
    QuadratureNotConverged { achieved: f64, wanted: f64 },

    #[error("only {available} bound states for {wells} wells")]
    TooFewBoundStates { available: usize, wells: usize },

    #[error(
        "imaginary-time search did not converge after {steps} steps (last energy {last_energy})"
    )]
    NotConverged { steps: usize, last_energy: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    /// Scenario validation error naming the offending config field.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::Config { .. }
            | Error::BudgetTooSmall { .. } => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            // Validation errors keep their field name visible.
            e @ Error::Config { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
