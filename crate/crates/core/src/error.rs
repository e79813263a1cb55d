use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised across the retrieval pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm vector")]
    ZeroNormVector,

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("text at position {0} is empty")]
    EmptyText(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("remote service unavailable after {attempts} attempt(s): {message}")]
    RemoteUnavailable { attempts: u32, message: String },

    #[error("remote service rejected the request with status {status}: {message}")]
    RemoteRejected { status: u16, message: String },

    #[error("malformed remote response: {0}")]
    MalformedResponse(String),

    #[error("language model unavailable: {0}")]
    LmUnavailable(String),

    #[error("unknown document `{0}`")]
    UnknownDocument(String),

    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),

    #[error("query belongs to document `{query_doc}`, not `{doc}`")]
    ForeignQuery { doc: String, query_doc: String },

    #[error("invalid k = {k} for {n} point(s)")]
    InvalidK { k: usize, n: usize },

    #[error("clustering has fewer than two clusters")]
    DegenerateClustering,

    #[error("query set is empty")]
    EmptyQuerySet,

    #[error("document `{0}` has no sharpened embedding; run index sharpening first")]
    MissingSharpenedEmbedding(String),

    #[error("embedder fingerprint mismatch: index has {index}, caller has {caller}")]
    FingerprintMismatch { index: String, caller: String },

    #[error("corrupt index at {path}{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    CorruptIndex {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("zero variance")]
    ZeroVariance,

    #[error("missing perplexity for {} document(s): {}", .0.len(), .0.join(", "))]
    MissingPerplexity(Vec<String>),

    #[error("no judged query in run")]
    NoJudgedQuery,

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("document `{doc}` already has a {kind} query with ordinal >= {ordinal}")]
    QueryOrdinalOrder { doc: String, kind: String, ordinal: u32 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing {what} at {}", path.display())]
    MissingArtifact { what: &'static str, path: PathBuf },

    #[error("workdir is locked by another command ({})", .0.display())]
    WorkdirLocked(PathBuf),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Remote,
    Internal,
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Context { source, .. } => source.class(),
            Error::RemoteUnavailable { .. }
            | Error::RemoteRejected { .. }
            | Error::MalformedResponse(_)
            | Error::LmUnavailable(_) => ErrorClass::Remote,
            Error::ZeroNormVector
            | Error::NonFinite(_)
            | Error::DegenerateClustering
            | Error::InvalidK { .. }
            | Error::EmptyQuerySet
            | Error::ZeroVariance
            | Error::Csv(_) => ErrorClass::Internal,
            _ => ErrorClass::Input,
        }
    }
}
