use std::path::PathBuf;

use smooth_eb_core::Error as CoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("JSON parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("JSON schema error: field `{field}` {problem}")]
    Schema { field: &'static str, problem: &'static str },
    #[error("{path}: row {row}: {message}")]
    Data { path: PathBuf, row: usize, message: String },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("invalid model: {0}")]
    Model(CoreError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl Error {
    pub const EXIT_USAGE: i32 = 2;
    pub const EXIT_DATA: i32 = 3;
    pub const EXIT_NUMERIC: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => Self::EXIT_USAGE,
            Error::Io { .. } | Error::Parse { .. } | Error::Schema { .. } | Error::Data { .. } | Error::Csv { .. } => {
                Self::EXIT_DATA
            }
            Error::Model(_) => Self::EXIT_DATA,
            Error::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Replication { source, .. } => core_exit_code(source),
        CoreError::InvalidParameter { .. } | CoreError::BudgetTooSmall { .. } | CoreError::EtaTooLarge { .. } => {
            Error::EXIT_USAGE
        }
        CoreError::Numerics(_) | CoreError::GridMismatch { .. } => Error::EXIT_NUMERIC,
        _ => Error::EXIT_DATA,
    }
}
