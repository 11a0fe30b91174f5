//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type. Every variant maps to a stable machine-readable
/// kind string (see [`Error::kind`]) so the CLI can emit single-line errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),

    #[error("embedder fingerprint mismatch: store has {stored}, provider is {provider}")]
    FingerprintMismatch { stored: String, provider: String },

    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("provider returned an empty completion")]
    EmptyCompletion,

    #[error("alignment error: {expected} records vs {got} embeddings")]
    Alignment { expected: usize, got: usize },

    #[error("stale batch: {0}")]
    StaleBatch(String),

    #[error("node {0} has no neighbors")]
    IsolatedNode(u32),

    #[error("unknown task: {0}")]
    UnknownTask(String),

    #[error("prompt overflows token budget even after truncation: {0}")]
    OverflowAfterTruncation(String),

    #[error("length mismatch: {preds} predictions vs {golds} golds")]
    LengthMismatch { preds: usize, golds: usize },

    #[error("dataset contains no cases")]
    EmptyDataset,

    #[error("store has no graph; run build first")]
    MissingGraph,

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Stable identifier for machine-parseable CLI output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "IoError",
            Error::Parse { .. } => "ParseError",
            Error::Validation(_) => "ValidationError",
            Error::SchemaVersion(_) => "SchemaVersionError",
            Error::FingerprintMismatch { .. } => "FingerprintMismatch",
            Error::ProviderUnavailable(_) => "ProviderUnavailable",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyCompletion => "EmptyCompletion",
            Error::Alignment { .. } => "AlignmentError",
            Error::StaleBatch(_) => "StaleBatchError",
            Error::IsolatedNode(_) => "IsolatedNode",
            Error::UnknownTask(_) => "UnknownTask",
            Error::OverflowAfterTruncation(_) => "OverflowAfterTruncation",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::EmptyDataset => "EmptyDataset",
            Error::MissingGraph => "MissingGraph",
            Error::Config(_) => "ConfigError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
