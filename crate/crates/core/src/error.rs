//! Error types for every stage of the pipeline.
//!
//! Each module owns a small error enum. [`Error`] wraps all of them and
//! exposes a stable `module:code` tag used by the CLI for its
//! machine-parseable `error:<module>:<code>` prefix.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid dimension {nx}x{ny}: both must be >= 1")]
    Dimension { nx: usize, ny: usize },
    #[error("field has {got} values, grid {nx}x{ny} needs {expected}")]
    Length {
        nx: usize,
        ny: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value {value} at cell {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("grid mismatch: expected {expected:?}, got {got:?}")]
    Mismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum KleError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(
        "eigenvalue {index} ({value:e}) is below 1e-12 of the leading eigenvalue; use fewer than {index} modes"
    )]
    Truncation { index: usize, value: f64 },
    #[error("energy threshold {threshold} is not reachable with {available} modes")]
    Energy { threshold: f64, available: usize },
}

#[derive(Debug, Error)]
pub enum KrigingError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("measurements {first} and {second} snap to the same cell {cell}")]
    Collision {
        first: usize,
        second: usize,
        cell: usize,
    },
    #[error(
        "kriging system is ill-conditioned (condition number {condition:e}); closest measurement pair is {first} and {second}"
    )]
    IllConditioned {
        condition: f64,
        first: usize,
        second: usize,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ConditioningError {
    #[error("{m} measurements with {n} modes leaves no nontrivial nullspace (need m < n)")]
    NoNullspace { m: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Error)]
pub enum DarcyError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("linear system is singular: {0}")]
    Singular(String),
    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
}

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("forward solve failed at iteration {iteration}: {source}")]
    Forward {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("chain {chain} has zero variance in every parameter")]
    DegenerateChain { chain: usize },
    #[error("parameter {index} has zero within-chain variance")]
    DegenerateParameter { index: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Syntax { path: PathBuf, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: expected {expected}")]
    Type { key: String, expected: String },
    #[error("config key `{key}`: {msg}")]
    Range { key: String, msg: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kle(#[from] KleError),
    #[error(transparent)]
    Kriging(#[from] KrigingError),
    #[error(transparent)]
    Conditioning(#[from] ConditioningError),
    #[error(transparent)]
    Darcy(#[from] DarcyError),
    #[error(transparent)]
    Mcmc(#[from] McmcError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable `module:code` tag for this error.
    pub fn tag(&self) -> String {
        let (module, code) = match self {
            Error::Grid(e) => (
                "grid",
                match e {
                    GridError::Dimension { .. } => "dimension",
                    GridError::Length { .. } => "shape",
                    GridError::NonFinite { .. } => "nonfinite",
                    GridError::Mismatch { .. } => "mismatch",
                    GridError::Parse { .. } => "parse",
                    GridError::Io { .. } => "io",
                },
            ),
            Error::Kle(e) => (
                "kle",
                match e {
                    KleError::Argument(_) => "argument",
                    KleError::Truncation { .. } => "truncation",
                    KleError::Energy { .. } => "energy",
                },
            ),
            Error::Kriging(e) => (
                "kriging",
                match e {
                    KrigingError::Argument(_) => "argument",
                    KrigingError::Collision { .. } => "collision",
                    KrigingError::IllConditioned { .. } => "conditioning",
                    KrigingError::Parse { .. } => "parse",
                    KrigingError::Io { .. } => "io",
                },
            ),
            Error::Conditioning(e) => (
                "conditioning",
                match e {
                    ConditioningError::NoNullspace { .. } => "nullspace",
                    ConditioningError::Shape(_) => "shape",
                },
            ),
            Error::Darcy(e) => (
                "darcy",
                match e {
                    DarcyError::Argument(_) => "argument",
                    DarcyError::Singular(_) => "singular",
                    DarcyError::Residual { .. } => "residual",
                },
            ),
            Error::Mcmc(e) => (
                "mcmc",
                match e {
                    McmcError::Argument(_) => "argument",
                    McmcError::Forward { .. } => "forward",
                    McmcError::Parse { .. } => "parse",
                    McmcError::Io { .. } => "io",
                },
            ),
            Error::Diagnostics(e) => (
                "diagnostics",
                match e {
                    DiagnosticsError::Argument(_) => "argument",
                    DiagnosticsError::DegenerateChain { .. } => "degenerate_chain",
                    DiagnosticsError::DegenerateParameter { .. } => "degenerate_parameter",
                    DiagnosticsError::Io { .. } => "io",
                },
            ),
            Error::Config(e) => (
                "cli",
                match e {
                    ConfigError::Io { .. } => "io",
                    ConfigError::Syntax { .. } => "syntax",
                    ConfigError::UnknownKey(_) => "unknown_key",
                    ConfigError::Type { .. } => "type",
                    ConfigError::Range { .. } => "range",
                },
            ),
            Error::Io { .. } => ("cli", "io"),
        };
        format!("{module}:{code}")
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
