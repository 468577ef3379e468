use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("value out of range for `{field}` in row {row}: {detail}")]
    ValueOutOfRange {
        field: String,
        row: usize,
        detail: String,
    },

    #[error("malformed record in row {row}: {detail}")]
    Malformed { row: usize, detail: String },

    #[error("dialog for user `{0}` is incomplete or out of order")]
    IncompleteDialog(String),

    #[error("user `{user_id}` has inconsistent `{field}` across rows")]
    InconsistentUser { user_id: String, field: String },

    #[error("step {0} is outside 1..=12")]
    StepOutOfRange(i64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("need at least 2 users to fit trait distributions, got {0}")]
    InsufficientUsers(usize),

    #[error("invalid truncation bounds or spread: lo={lo}, hi={hi}, sd={sd}")]
    InvalidBounds { lo: f64, hi: f64, sd: f64 },

    #[error("no data for condition {0}")]
    NoDataForCondition(String),

    #[error("condition does not match table mode {0}")]
    ModeMismatch(String),

    #[error("expected 12 proactive acts, got {0}")]
    WrongActCount(usize),

    #[error("insufficient training data: {0}")]
    InsufficientData(String),

    #[error("training labels contain a single class ({0})")]
    DegenerateLabels(u8),

    #[error("feature schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("test set is empty")]
    EmptyTestSet,

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("probability vector has a negative or non-finite entry at index {0}")]
    NegativeEntry(usize),

    #[error("sequence is empty")]
    EmptySequence,

    #[error("simulated log is not aligned with the reference corpus: {0}")]
    AlignmentError(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
}

impl Error {
    /// True for errors caused by bad input data or configuration, as opposed
    /// to failures that happen while the pipeline is running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::ValueOutOfRange { .. }
                | Error::Malformed { .. }
                | Error::IncompleteDialog(_)
                | Error::InconsistentUser { .. }
                | Error::StepOutOfRange(_)
                | Error::InvalidConfig(_)
                | Error::EmptyCorpus
                | Error::InvalidBounds { .. }
                | Error::ModeMismatch(_)
                | Error::WrongActCount(_)
                | Error::SchemaMismatch { .. }
                | Error::InvalidHyperparams(_)
                | Error::AlignmentError(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::TomlDe(_)
        )
    }

    /// Short stable identifier used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MissingColumn",
            Error::ValueOutOfRange { .. } => "ValueOutOfRange",
            Error::Malformed { .. } => "Malformed",
            Error::IncompleteDialog(_) => "IncompleteDialog",
            Error::InconsistentUser { .. } => "InconsistentUser",
            Error::StepOutOfRange(_) => "StepOutOfRange",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::InsufficientUsers(_) => "InsufficientUsers",
            Error::InvalidBounds { .. } => "InvalidBounds",
            Error::NoDataForCondition(_) => "NoDataForCondition",
            Error::ModeMismatch(_) => "ModeMismatch",
            Error::WrongActCount(_) => "WrongActCount",
            Error::InsufficientData(_) => "InsufficientData",
            Error::DegenerateLabels(_) => "DegenerateLabels",
            Error::SchemaMismatch { .. } => "SchemaMismatch",
            Error::EmptyTestSet => "EmptyTestSet",
            Error::EpisodeFinished => "EpisodeFinished",
            Error::InvalidHyperparams(_) => "InvalidHyperparams",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::NegativeEntry(_) => "NegativeEntry",
            Error::EmptySequence => "EmptySequence",
            Error::AlignmentError(_) => "AlignmentError",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
            Error::TomlDe(_) => "Toml",
        }
    }
}
