//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..=12")]
    QubitCount(usize),

    #[error("qubit index {index} out of range for {n_qubits}-qubit state")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("cnot target {target} must differ from control {control}")]
    CnotQubits { target: usize, control: usize },

    #[error("rotation angle must be finite")]
    NonFiniteAngle,

    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid layer: {0}")]
    InvalidLayer(String),

    #[error("descriptor parse error at row {row}, column {col}: {message}")]
    DescriptorParse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("parameter vector has {got} entries, circuit has {expected} rotation gates")]
    ThetaLength { expected: usize, got: usize },

    #[error("gram matrix defect: {0}")]
    GramDefect(String),

    #[error("svm training error: {0}")]
    Training(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("csv ingestion error in {path}{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    CsvIngest {
        path: String,
        row: Option<usize>,
        message: String,
    },

    #[error("data generation error: {0}")]
    Generation(String),

    #[error("bayesian optimization error: {0}")]
    BayesOpt(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad configuration or unusable inputs, as
    /// opposed to runtime failures. The CLI maps these to exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::CsvIngest { .. } | Error::DescriptorParse { .. }
        )
    }
}
