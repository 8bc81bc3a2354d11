use std::path::PathBuf;

/// Errors raised by the metric, clustering and statistics routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("joint {joint} at {value} rad is outside limits [{min}, {max}]")]
    JointLimitViolation {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("sample {sample}: {source}")]
    AtSample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("rotation is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("timestamps not strictly increasing at row {row}")]
    NonMonotoneTime { row: usize },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("series too short: need at least {needed} samples, got {actual}")]
    TooShort { needed: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("metric {metric}: {source}")]
    Metric {
        metric: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("demonstrations in set {0} do not share the same metric availability")]
    InconsistentAvailability(String),

    #[error("singular design: term `{term}` is collinear with earlier columns")]
    SingularDesign { term: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn at_sample(self, sample: usize) -> Self {
        Error::AtSample {
            sample,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_metric(self, metric: &'static str) -> Self {
        Error::Metric {
            metric,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
