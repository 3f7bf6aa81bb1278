use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A cell could not be parsed. `row` is 1-based over data rows (header excluded).
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical domain error: {0}")]
    Domain(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("run {run}, k={k}: {source}")]
    Run {
        run: usize,
        k: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's input rather than by the run itself.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Argument(_) | Error::Config(_))
    }
}

macro_rules! ensure_arg {
    ($cond:expr, $($fmt:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err($crate::error::Error::Argument(format!($($fmt)+)));
        }
    }};
}
pub(crate) use ensure_arg;
