use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("document contains no alphanumeric token")]
    EmptyDocument,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("jaccard similarity of two empty sets is undefined")]
    BothEmpty,
    #[error("invalid anchor: {0}")]
    InvalidAnchor(String),
    #[error("anchored count {anchored} exceeds multiplicity {multiplicity}")]
    InvalidRange { multiplicity: u32, anchored: u32 },
    #[error("exact enumeration needs {outcomes} outcomes, cap is {cap}")]
    TooLarge { outcomes: u128, cap: u128 },
    #[error("{count} candidate anchors exceed the enumeration cap {cap}")]
    TooManyAnchors { count: u128, cap: u128 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("training corpus contains a single label")]
    DegenerateLabels,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("words {first:?} and {second:?} share the same rank weight {weight}")]
    RankTies {
        first: String,
        second: String,
        weight: f64,
    },
    #[error("no positively classified document in bucket {0}")]
    EmptyBucket(String),
    #[error("the explained example must not contain UNK tokens")]
    UnkInExample,
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
