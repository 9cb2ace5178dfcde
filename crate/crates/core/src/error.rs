use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has zero norm")]
    ZeroNorm,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported container version {0}")]
    VersionUnsupported(u16),

    #[error("file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("unknown video id {0:?}")]
    UnknownId(String),

    #[error("gallery is empty")]
    EmptyGallery,

    #[error("missing ground truth: {0}")]
    MissingGroundTruth(String),

    #[error("batch too small: need at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("{0} is constant across the batch")]
    DegenerateChannel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures of the underlying file system rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
