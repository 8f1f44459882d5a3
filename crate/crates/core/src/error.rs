use thiserror::Error;

pub type Result<T> = std::result::Result<T, MosaicError>;

#[derive(Debug, Error)]
pub enum MosaicError {
    #[error("negative count {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: i64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("degenerate bivariate covariance (correlation {0})")]
    DegenerateCovariance(f64),

    #[error("quadrature order {0} outside 1..=200")]
    QuadratureOrder(usize),

    #[error("scatter matrix is singular; use more observations than dimensions (n = {n}, p = {p})")]
    SingularScatter { n: usize, p: usize },

    #[error("estimated information block {block} is not positive definite")]
    NonPositiveBlock { block: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
