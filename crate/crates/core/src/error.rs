use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the stage that raises them: ingestion, estimation,
/// cross-fitting, diagnostics and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("dataset has no labeled rows")]
    EmptyLabeledSet,
    #[error("dataset has no unlabeled rows")]
    EmptyUnlabeled,
    #[error("insufficient labeled rows: need at least {needed}, have {have}")]
    InsufficientLabeled { needed: usize, have: usize },
    #[error("rank-deficient design ({context}): condition number {condition:e}")]
    RankDeficientDesign { context: String, condition: f64 },
    #[error("missing predictions: {0}")]
    MissingPredictions(String),
    #[error("invalid confidence level {0}; must lie strictly between 0 and 1")]
    InvalidLevel(f64),
    #[error("invalid lambda {0}; must lie in [0, 1]")]
    InvalidLambda(f64),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("too few labeled rows ({n_labeled}) for {folds} folds")]
    TooFewLabeled { n_labeled: usize, folds: usize },
    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),
    #[error("fold plan does not match dataset: {0}")]
    FoldMismatch(String),
    #[error("invalid bootstrap configuration: {0}")]
    InvalidBootConfig(String),
    #[error("invalid learner specification: {0}")]
    InvalidLearner(String),
    #[error("sample needs at least {needed} elements, has {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("pooled scale is zero but means differ")]
    DegenerateScale,
    #[error("empty sample")]
    EmptySample,
    #[error("dimension mismatch: {0} vs {1} columns")]
    DimensionMismatch(usize, usize),
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible labeling mechanism: high-side probability {0} exceeds 1")]
    InfeasibleMechanism(f64),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("config error: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
