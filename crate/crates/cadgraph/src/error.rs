//! Crate-wide error type.
//!
//! Variants are grouped by contract: `Contract`-class errors mean the caller
//! violated a documented precondition or a file failed validation; `Io` means
//! the filesystem or stream failed. The CLI maps the former to exit code 2
//! and the latter to exit code 3.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameter outside a curve/surface domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A part failed a structural invariant (dangling ids, empty face set, ...).
    #[error("invalid part {part}: {reason}")]
    InvalidPart { part: String, reason: String },

    /// Degenerate geometry where a non-degenerate one is required.
    #[error("degenerate part {part}: {reason}")]
    DegeneratePart { part: String, reason: String },

    /// A synthetic family spec that cannot produce valid geometry.
    #[error("family spec error: {0}")]
    FamilySpec(String),

    /// Feature extraction failed for a specific face or curve.
    #[error("feature extraction failed for {entity}: {reason}")]
    FeatureExtraction { entity: String, reason: String },

    /// An attribute value does not match the schema.
    #[error("schema error for attribute {attr:?}: {reason}")]
    Schema { attr: String, reason: String },

    /// Tensor shapes incompatible for an operation.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A documented API precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric guard tripped (zero norms, non-finite values).
    #[error("numeric guard: {0}")]
    NumericGuard(String),

    /// Training aborted on a non-finite loss; carries diagnostics.
    #[error("training diverged at epoch {epoch}, batch {batch} (parts {parts:?}); loss trace: {trace:?}")]
    TrainDiverged {
        epoch: usize,
        batch: usize,
        parts: Vec<String>,
        trace: Vec<f64>,
    },

    /// Unknown type index routed to a parameter bank.
    #[error("routing error: {0}")]
    Routing(String),

    /// Checkpoint/index/cache file malformed or version mismatch.
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    /// A JSONL line failed to parse.
    #[error("parse error at {path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    /// Query-side errors (dimension mismatch, missing parts).
    #[error("query error: {0}")]
    Query(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for filesystem-level failures (CLI exit code 3); everything else
    /// is a contract-class error (exit code 2).
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
