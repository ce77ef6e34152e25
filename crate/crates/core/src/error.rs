use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the drift-detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("ordering error at row {row}: seq {seq} does not increase (previous {previous})")]
    Ordering { row: usize, seq: u64, previous: u64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("sizing error: {0}")]
    Sizing(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("class error: {0}")]
    Class(String),

    #[error("neighbor-count error: minority has {minority} records but k_neighbors = {k}; use k_neighbors < {minority}")]
    NeighborCount { minority: usize, k: usize },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("input error at index {index}: {message}")]
    Input { index: usize, message: String },

    #[error("label availability error: {0}")]
    LabelAvailability(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error category, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::NeighborCount { .. } => ErrorKind::Config,
            Error::Parse { .. }
            | Error::Ordering { .. }
            | Error::Schema(_)
            | Error::Sizing(_)
            | Error::Class(_)
            | Error::LabelAvailability(_)
            | Error::Pairing(_)
            | Error::Input { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::DegenerateModel(_) | Error::Numeric(_) => ErrorKind::Runtime,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
