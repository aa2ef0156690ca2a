use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("label {label} out of range for {n_classes} classes (sample {index})")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        n_classes: usize,
    },

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("sample index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("near-interpolation: 1 - h_ii = {margin:e} at sample {index}")]
    NearInterpolation { index: usize, margin: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("sgd diverged at alpha = {alpha}")]
    Divergence { alpha: f64 },

    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),

    #[error("variable `{variable}` in record `{record}`: {message}")]
    TypeMismatch {
        record: String,
        variable: String,
        message: String,
    },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    MalformedCell {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },

    #[error("quantile {0} is not part of the report")]
    UnknownQuantile(f64),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("model {index} failed: {source}")]
    ModelFailed {
        index: usize,
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
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
