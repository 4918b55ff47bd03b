use thiserror::Error;

use crate::spaces::Key;
use crate::tree::TreeNode;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("the root has no segment decomposition")]
    RootHasNoSegments,

    #[error("capacity exhausted in {what}: need {required}, have {available}")]
    CapacityExhausted {
        what: String,
        required: u64,
        available: u64,
    },

    #[error("node {0} is not part of this map")]
    UnknownNode(TreeNode),

    #[error("invalid exponent p = {0} (need p >= 1)")]
    InvalidExponent(f64),

    #[error("coordinate key {0} lies outside every declared block")]
    KeyOutsideBlocks(Key),

    #[error("coordinate key {0} is declared in more than one block")]
    OverlappingBlocks(Key),

    #[error("coordinate key {0} has no level in the grading")]
    UngradedKey(Key),

    #[error("delta = {0} is outside (0, 1)")]
    InvalidDelta(f64),

    #[error(
        "delta schedule rejected at window l = {window} (levels {} and {}): {lhs} > {rhs}",
        .levels.0, .levels.1
    )]
    ScheduleRejected {
        window: usize,
        levels: (usize, usize),
        lhs: f64,
        rhs: f64,
    },

    #[error("invalid delta schedule: {0}")]
    InvalidSchedule(String),

    #[error("depth {depth} needs level {required_level} but only levels 0..={available} exist")]
    DepthExceedsLevels {
        depth: usize,
        required_level: usize,
        available: usize,
    },

    #[error("map is not injective: {0} and {1} share an image")]
    NonInjective(String, String),

    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),

    #[error("invalid pair budget: {0}")]
    Budget(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("not a sorted k-subset of positive integers: {0:?}")]
    NotSubset(Vec<u32>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("distance table is not a metric: d({i},{k}) exceeds d({i},{j}) + d({j},{k}) by {excess}")]
    NotMetric {
        i: usize,
        j: usize,
        k: usize,
        excess: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}
