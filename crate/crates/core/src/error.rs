use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),
    #[error("line {line}: non-numeric income `{value}`")]
    NonNumeric { line: u64, value: String },
    #[error("line {line}: negative income {value}")]
    NegativeIncome { line: u64, value: f64 },
    #[error("zero total income")]
    ZeroTotal,
    #[error("need at least 2 units, got {0}")]
    TooFewUnits(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{count} subsets exceed the enumeration cap of {cap}")]
    TooManySubsets { count: u128, cap: u128 },
    #[error("zero inclusion probability")]
    ZeroInclusionProbability,
    #[error("covariance matrix is singular after regularization")]
    SingularCovariance,
    #[error("segment {segment}: stacked covariance not PSD (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { segment: usize, min_eigenvalue: f64 },
    #[error("invalid experiment config:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("replication {replication} (n = {n}): {source}")]
    Replication {
        replication: usize,
        n: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::TooManySubsets { .. } => {
                ErrorClass::Usage
            }
            Error::SingularCovariance | Error::NotPositiveSemidefinite { .. } => {
                ErrorClass::Numerical
            }
            Error::Replication { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
