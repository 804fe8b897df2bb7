use thiserror::Error;

/// Errors produced by validation, training, and inference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at voxel {voxel}, time {time}")]
    NonFiniteEntry { voxel: usize, time: usize },

    #[error("extent mismatch: width {width} x height {height} = {product}, but volume has {voxels} voxels")]
    ExtentMismatch {
        width: usize,
        height: usize,
        product: usize,
        voxels: usize,
    },

    #[error("volume must have at least 1 voxel and 2 time points, got {voxels}x{times}")]
    DegenerateVolume { voxels: usize, times: usize },

    #[error("ragged input: row {row} has length {found}, expected {expected}")]
    RaggedInput {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("grid must have at least 2 units, got {k1}x{k2}")]
    DegenerateGrid { k1: usize, k2: usize },

    #[error("dimension mismatch: {context} (expected {expected}, got {found})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid training schedule: {0}")]
    InvalidSchedule(String),

    #[error("neighborhood radius must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("sample member {index} is incompatible: {reason}")]
    IncompatibleSample { index: usize, reason: String },

    #[error("distance matrix is not a valid dissimilarity: {0}")]
    InvalidDistanceMatrix(String),

    #[error("group is empty")]
    EmptyGroup,

    #[error("need at least {needed} group members, got {found}")]
    GroupTooSmall { needed: usize, found: usize },

    #[error("expected exactly 2 groups, got {0}")]
    NotTwoGroups(usize),

    #[error("permutation count must be at least 1")]
    NoPermutations,

    #[error("reference map has no active voxels")]
    EmptyReference,

    #[error("no p-values supplied")]
    EmptyPValues,

    #[error("invalid significance level {0}, must lie in (0, 1)")]
    InvalidAlpha(f64),

    #[error("{path}: {reason}")]
    DataFile { path: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
