use thiserror::Error;

/// Errors raised by the estimation, averaging and simulation routines.
#[derive(Debug, Error)]
pub enum SvmmaError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("cannot parse {value:?} as a finite number (row {row}, column `{column}`)")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid transform for column `{column}`: {reason}")]
    InvalidTransform { column: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "singular local fit at s = ({:.6}, {:.6}) with bandwidth {bandwidth}: \
         {support} weighted points for {dim} coefficients{}",
        location[0],
        location[1],
        index.map(|i| format!(" (row {i})")).unwrap_or_default()
    )]
    SingularLocalFit {
        location: [f64; 2],
        bandwidth: f64,
        support: usize,
        dim: usize,
        index: Option<usize>,
    },

    #[error("no valid bandwidth among {0} grid points")]
    NoValidBandwidth(usize),

    #[error("degenerate degrees of freedom: hat trace {trace} >= n = {n}")]
    DegenerateDof { trace: f64, n: usize },

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error(
        "simplex QP did not converge after {iterations} iterations (KKT residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("leverage equal to one at row {row} of candidate {candidate}")]
    UnitLeverage { candidate: usize, row: usize },

    #[error("every information-criterion score is +inf")]
    AllScoresInfinite,

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
}

pub type Result<T> = std::result::Result<T, SvmmaError>;
