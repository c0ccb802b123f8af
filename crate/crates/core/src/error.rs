use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants fall into three families which map onto CLI exit codes:
/// input problems (2), statistical degeneracy (3) and internal faults (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("malformed value at row {row}, column `{column}`: {detail}")]
    MalformedValue {
        row: usize,
        column: String,
        detail: String,
    },
    #[error("duplicate case id `{0}`")]
    DuplicateCaseId(String),
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("case `{case_id}` is missing feature `{feature}`")]
    MissingFeature { case_id: String, feature: String },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),
    #[error("threshold {0} outside the open interval (0, 1)")]
    ThresholdOutOfRange(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("value {value} out of range for {what}")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("lymphocyte count is zero")]
    ZeroDenominator,
    #[error("bin count must be at least 2, got {0}")]
    InvalidBinCount(usize),
    #[error("invalid replicate count {0}; at least 100 required")]
    InvalidReplicateCount(usize),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("only one outcome class present")]
    SingleClass,
    #[error("no positive cases")]
    NoPositives,
    #[error("each class needs at least two cases (positives {positives}, negatives {negatives})")]
    DegenerateClassSize { positives: usize, negatives: usize },
    #[error("every F1 value in the sweep is undefined")]
    AllUndefined,
    #[error("every reliability bin is empty")]
    AllBinsEmpty,
    #[error("AUC difference has zero variance")]
    ZeroVariance,
    #[error("{redraws} degenerate resamples exceeded the retry cap of {cap} attempts")]
    TooManyDegenerateReplicates { redraws: usize, cap: usize },
    #[error("statistic undefined on the full sample")]
    UndefinedStatistic,
    #[error("complete or quasi-complete separation (|beta| = {max_abs_beta:.3e})")]
    Separation { max_abs_beta: f64 },
    #[error("design matrix is rank deficient")]
    Singular,
    #[error("solver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, with stage annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 input error, 3 statistical degeneracy, 4 internal.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self.root() {
            SingleClass
            | NoPositives
            | DegenerateClassSize { .. }
            | AllUndefined
            | AllBinsEmpty
            | ZeroVariance
            | TooManyDegenerateReplicates { .. }
            | UndefinedStatistic
            | Separation { .. }
            | Singular
            | NotConverged { .. } => 3,
            Internal(_) => 4,
            _ => 2,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
