use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate skill name or alias `{0}`")]
    DuplicateSkill(String),
    #[error("skill dictionary is empty")]
    EmptyDictionary,
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unknown skill id {0}")]
    UnknownSkill(usize),
    #[error("unknown criteria label `{0}`")]
    UnknownLabel(String),
    #[error("topic {topic} out of range (K = {num_topics})")]
    TopicOutOfRange { topic: usize, num_topics: usize },
    #[error("corpus contains no trainable documents")]
    EmptyCorpus,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("count tables inconsistent with assignments: {0}")]
    InconsistentCounts(String),
    #[error("model version mismatch: {0}")]
    VersionMismatch(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("no training posting carries label `{0}`")]
    LabelUnseen(String),
    #[error("incomplete judgments: {0}")]
    IncompleteJudgments(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
