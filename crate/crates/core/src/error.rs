use std::path::PathBuf;

use crate::driver::MlmcReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid direction numbers: {0}")]
    InvalidDirectionNumbers(String),

    #[error("requested points {start}..{start}+{count} run past the 2^32 points of the sequence")]
    SequenceOverflow { start: u64, count: u64 },

    #[error("{name} = {value} is outside its domain ({domain})")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("matrix is not positive definite: pivot {index} is {value}")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("root finder failed: {0}")]
    RootFinding(String),

    #[error("MLMC did not converge within {max_levels} levels")]
    NonConvergence {
        max_levels: usize,
        report: Box<MlmcReport>,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            domain,
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
