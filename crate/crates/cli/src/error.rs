use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("output directory {0} is not empty; choose another --out or pass --overwrite")]
    OutputExists(PathBuf),

    #[error("run ended with a numerical failure: {0}")]
    RunFailed(String),

    #[error(transparent)]
    Core(#[from] thinfilm::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    /// 1 for domain errors, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use thinfilm::Error as E;
        match self {
            Self::RunFailed(_) => 2,
            Self::Core(
                E::NewtonDiverged { .. }
                | E::NumericalFailure(_)
                | E::SingularMatrix
                | E::QuadratureFailure { .. }
                | E::BracketFailure(_),
            ) => 2,
            _ => 1,
        }
    }
}
