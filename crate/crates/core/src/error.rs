use thiserror::Error;

use crate::group::Dim;

/// Errors shared by every module of the crate.
///
/// Refusals that the caller is expected to branch on (an ε-disjointness
/// search that finds no witness, a capped exact search that downgrades to a
/// bound) are ordinary return values, not variants here.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch { expected: Dim, found: Dim },

    #[error("empty set where a nonempty finite subset is required")]
    EmptySet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("greedy quasi-tiling reached coverage {achieved:.6}, below the required {required:.6}")]
    CoverageShortfall { achieved: f64, required: f64 },

    #[error("side lengths must be increasing and each must divide the next: {0:?}")]
    NonDividingSides(Vec<i64>),

    #[error("no index up to {cap} satisfies the level-{level} decomposition conditions")]
    UnreachableThreshold { level: usize, cap: u64 },

    #[error("index {n} lies outside the built decomposition range ({lo}, {hi}]")]
    OutsideRange { n: u64, lo: u64, hi: u64 },

    #[error("epsilon {epsilon} is not below the word-resolution threshold {threshold}")]
    AboveResolutionThreshold { epsilon: f64, threshold: f64 },

    #[error("measure has radius {available} but radius {required} is needed")]
    InsufficientDepth { required: usize, available: usize },

    #[error("not a probability vector / stochastic matrix: {0}")]
    NotStochastic(String),

    #[error("stationary vector check failed: residual {0:e}")]
    NotStationary(f64),

    #[error("measure has no generating specification (empirical measure)")]
    NoGeneratingSpec,

    #[error("transition matrix is not mixing (no positive power up to {0})")]
    NotMixing(usize),

    #[error("configuration is not admissible for the system: {0}")]
    Inadmissible(String),

    #[error("gluing gap {gap} is smaller than the mixing gap {required}")]
    GapTooSmall { gap: i64, required: usize },

    #[error("glued point left the mistake ball of segment {segment}: {mistakes} mistakes, budget {budget}")]
    MistakeBudgetExceeded { segment: usize, mistakes: usize, budget: f64 },

    #[error("sampler found no admissible pattern within {xi} after {budget} draws")]
    SamplerExhausted { xi: f64, budget: usize },

    #[error("computation budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("region exceeded: {0}")]
    RegionExceeded(String),

    #[error("configuration schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
