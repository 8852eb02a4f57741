use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ingestion
    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),
    #[error("row {row}: cannot parse date `{value}`")]
    UnparseableDate { row: usize, value: String },
    #[error("row {row}: value `{value}` is not a finite number")]
    NonFiniteValue { row: usize, value: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("series `{0}` is empty after dropping missing values")]
    EmptyAfterCleaning(String),
    #[error("no observation within the lookback window before {0}")]
    EmptyMonth(NaiveDate),
    #[error("series do not share any month")]
    NoOverlap,
    #[error("series `{0}` is not monthly (dates must fall on the first of the month)")]
    NotMonthly(String),
    #[error("series `{series}` has no value for {month}")]
    MissingMonth { series: String, month: NaiveDate },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    // preprocessing and statistics
    #[error("series is constant; min-max scaling is undefined")]
    ConstantSeries,
    #[error("series of length {len} is too short (need at least {needed})")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("panel of length {len} cannot hold lookback {lookback} plus horizon {horizon}")]
    InsufficientLength { len: usize, lookback: usize, horizon: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { got: usize, needed: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("input is constant")]
    ConstantInput,
    #[error("target is constant; R² is undefined")]
    ConstantTarget,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("regression design is singular")]
    SingularRegression,
    #[error("unknown series `{0}`")]
    UnknownSeries(String),
    #[error("unknown commodity `{0}`")]
    UnknownCommodity(String),

    // models
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { got: usize, needed: usize },
    #[error("training loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("dataset has no windows")]
    EmptyDataset,
    #[error("need {needed} rows of history, got {got}")]
    InsufficientHistory { got: usize, needed: usize },
    #[error("report fragments cover different commodity sets")]
    CommoditySetMismatch,

    // pipeline
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact from stage `{0}`")]
    MissingArtifact(String),
    #[error("stage `{stage}` failed: {source}")]
    StageFailure {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for configuration
    /// problems, 3 for data problems, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::StageFailure { source, .. } => source.exit_code(),
            Error::Config(_) | Error::InvalidConfig(_) | Error::InvalidSpec(_) => 2,
            Error::ConstantSeries
            | Error::ConstantInput
            | Error::ConstantTarget
            | Error::SingularRegression
            | Error::NonFiniteLoss(_) => 4,
            _ => 3,
        }
    }
}
