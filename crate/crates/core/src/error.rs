use thiserror::Error;

/// Errors raised by the numerical kernels and the study runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular basis: |det T_E| = {det:e} (threshold {threshold:e})")]
    Singular { det: f64, threshold: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bases are not permuted dual; Gram matrix {gram:?}")]
    NotPermutedDual { gram: Vec<Vec<f64>> },

    #[error("system is not a frame: min eigenvalue {min_eigenvalue:e}, max eigenvalue {max_eigenvalue:e}")]
    NotAFrame {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("frequency {alpha:?} lies outside the Nyquist range of the grid")]
    Aliasing { alpha: Vec<i64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solver did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("config error at `{pointer}`: {message}")]
    Config { pointer: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag used in JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Singular { .. } => "singular",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Range(_) => "range",
            Error::Resolution(_) => "resolution",
            Error::Truncation(_) => "truncation",
            Error::Precondition(_) => "precondition",
            Error::NotPermutedDual { .. } => "not_permuted_dual",
            Error::NotAFrame { .. } => "not_a_frame",
            Error::Aliasing { .. } => "aliasing",
            Error::Unsupported(_) => "unsupported",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 2 for precondition and validation failures, 3 for
    /// resolution and truncation failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Resolution(_) | Error::Truncation(_) | Error::Aliasing { .. } => 3,
            Error::Io(_) | Error::NoConvergence { .. } => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
