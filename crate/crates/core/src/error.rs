use std::path::PathBuf;

use thiserror::Error;

/// Failures at the ingestion boundary: tensor files and scene-pair manifests.
#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("bad magic bytes {0:?}, expected \"SFID\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("truncated tensor: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid shape {0:?}: dimensions must be positive")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} holds {expected} elements but data has {actual}")]
    ElementCount {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at element {0}")]
    NonFinite(usize),
    #[error("{what}: value {value} at element {index} outside [0, 1]")]
    OutOfRange {
        what: String,
        index: usize,
        value: f64,
    },
    #[error("{what}: expected dtype {expected}, found {actual}")]
    WrongDtype {
        what: String,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("{what}: expected shape {expected:?}, found {actual:?}")]
    ShapeMismatch {
        what: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("time steps disagree on grid size: t1 is {t1:?}, t2 is {t2:?}")]
    CrossTimeShape { t1: (usize, usize), t2: (usize, usize) },
    #[error("{time}: {expected} categories but {actual} presence scores")]
    PresenceLength {
        time: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{0}")]
    InvalidManifest(String),
    #[error("manifest {path}: {source}")]
    ManifestSyntax {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Errors raised by the grid operations and the batch pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("stack depth {depth} does not match {expected} categories")]
    DepthMismatch { depth: usize, expected: usize },
    #[error("category {index} out of range for {count} categories")]
    CategoryOutOfRange { index: usize, count: usize },
    #[error("pixel ({row}, {col}) lies outside a {height}x{width} grid")]
    OutOfGrid {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("value {0} outside [0, 1]")]
    NotProbability(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scene generation failed: {0}")]
    Generation(String),
    #[error("evaluation: {0}")]
    Eval(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
