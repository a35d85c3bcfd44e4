use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Paired inputs disagree on the number of rows.
    #[error("row count mismatch: x has {x_rows} rows, y has {y_rows}")]
    Pairing { x_rows: usize, y_rows: usize },

    /// A table cell could not be parsed as a number.
    #[error("cannot parse value at row {row}, column {col}: {text:?}")]
    Parse { row: usize, col: usize, text: String },

    /// A parsed value is NaN or infinite.
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// An argument or option violates its documented domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample too small: n = {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },

    /// A column is constant where spread is required.
    #[error("column {col} has zero variance")]
    DegenerateColumn { col: usize },

    /// A feature's product variance is exactly zero under the empirical rule.
    #[error("feature ({j}, {k}) has zero product variance")]
    DegenerateFeature { j: String, k: String },

    /// A basis function was evaluated outside [0, 1].
    #[error("argument {value} outside [0, 1]")]
    Domain { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },

    /// Order-statistic index outside 1..=M.
    #[error("order index {i} outside 1..={m}")]
    Index { i: usize, m: usize },

    #[error("empty feature set")]
    EmptyFeatures,

    /// All pairwise distances are zero; no bandwidth can be chosen.
    #[error("degenerate sample: all pairwise distances are zero")]
    DegenerateSample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
