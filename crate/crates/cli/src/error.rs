use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: cannot read scenario: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("solver failed: {message} (trace in {})", trace.display())]
    Solver { message: String, trace: PathBuf },
    #[error(transparent)]
    Core(#[from] hnf_precoding::Error),
    #[error("{}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 for bad input, 3 for solver failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        use hnf_precoding::Error as E;
        match self {
            CliError::Parse { .. } | CliError::Invalid(_) | CliError::Argument(_) => 2,
            CliError::Solver { .. } => 3,
            CliError::Core(
                E::Solver(_) | E::Infeasible | E::Factorization { .. } | E::Trial { .. },
            ) => 3,
            CliError::Core(_) => 2,
            CliError::Read { .. } | CliError::Write { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
