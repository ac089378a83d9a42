use std::path::PathBuf;

use thiserror::Error;

/// Which side of a validity interval was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Lower => f.write_str("lower"),
            Bound::Upper => f.write_str("upper"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{model}: {quantity} {value} is outside the {bound} validity bound {limit}")]
    OutOfRange {
        model: String,
        quantity: &'static str,
        value: f64,
        bound: Bound,
        limit: f64,
    },

    #[error("no dispersion model for material {material:?} axis {axis}")]
    UnknownModel { material: String, axis: String },

    #[error("duplicate dispersion model for material {material:?} axis {axis}")]
    DuplicateModel { material: String, axis: String },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("could not read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e} after {nodes} nodes")]
    Integration {
        estimate: f64,
        tolerance: f64,
        nodes: usize,
    },

    #[error("invalid density matrix: {0}")]
    Validation(String),

    #[error("degenerate tomography design: {0}")]
    Degenerate(String),

    #[error("unusable measurement data: {0}")]
    Data(String),
}

impl Error {
    /// `true` for failures caused by bad inputs rather than numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Solver(_) | Error::Integration { .. })
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out_of_range",
            Error::UnknownModel { .. } => "unknown_model",
            Error::DuplicateModel { .. } => "duplicate_model",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Solver(_) => "solver",
            Error::Integration { .. } => "integration",
            Error::Validation(_) => "validation",
            Error::Degenerate(_) => "degenerate",
            Error::Data(_) => "data",
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
