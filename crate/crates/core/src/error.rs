use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("element outside the algebra span (residual {residual:.3e})")]
    Domain { residual: f64 },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("search failed: {0}")]
    SearchFailure(String),
    #[error("obstruction: subspace dimension {dim} exceeds rank {rank}")]
    Obstruction { dim: usize, rank: usize },
    #[error("loop outside the big cell: {0}")]
    OutsideBigCell(String),
    #[error("truncation residual {residual:.3e} not reached at degree {degree}")]
    Truncation { residual: f64, degree: usize },
    #[error("connection order (-1,1) violated: fit residual {residual:.3e}")]
    ConnectionOrder { residual: f64 },
    #[error("surviving domain is empty")]
    EmptyDomain,
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
