use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported image format for {}: {detail}", .path.display())]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("corrupt image data in {}: {detail}", .path.display())]
    CorruptImage { path: PathBuf, detail: String },

    #[error("empty image")]
    EmptyImage,

    #[error("minimum side must be a power of two >= 64, got {0}")]
    InvalidMinSide(usize),

    #[error("decomposition depth {depth} too large for image side {side}")]
    DepthTooLarge { depth: usize, side: usize },

    #[error("inconsistent wavelet pyramid: {0}")]
    InconsistentPyramid(String),

    #[error("tree navigation out of bounds: {0}")]
    OutOfTree(String),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("crop window {x0},{y0} {w}x{h} exceeds map of {width}x{height}")]
    WindowOutOfBounds {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("no fixations")]
    NoFixations,

    #[error("fixation ({x}, {y}) outside {width}x{height} map")]
    FixationOutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("ROC needs at least one positive and one negative pixel")]
    EmptyClass,

    #[error("inter-subject ROC needs at least two subjects")]
    SingleSubject,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("invalid mode `{0}` (expected e.g. uhmt0, thmt3, vhmt5)")]
    InvalidMode(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
