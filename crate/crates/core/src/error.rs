use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("vertex {vertex}: {reason}")]
    Vertex { vertex: usize, reason: String },

    #[error("eigensolver did not converge after {iterations} restarts (worst residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear algebra: {0}")]
    Linalg(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite values in {0}")]
    NonFinite(String),
}

/// Coarse error classes, used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Input,
    Numerical,
    Usage,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Parse { .. } | Error::Format { .. } | Error::InvalidMesh(_) | Error::Vertex { .. } => {
                ErrorCategory::Input
            }
            Error::NotConverged { .. } | Error::Linalg(_) | Error::NonFinite(_) => ErrorCategory::Numerical,
            Error::Shape(_) | Error::InvalidArgument(_) => ErrorCategory::Usage,
        }
    }
}
