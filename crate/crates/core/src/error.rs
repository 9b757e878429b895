use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("invalid dimensions: {0}")]
    InvalidDims(&'static str),
    #[error("contract violation: {0}")]
    Contract(&'static str),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
    #[error("dictionary has zero spectral norm")]
    DegenerateDictionary,
    #[error("dictionary is not tall ({rows} rows, {cols} columns); use the LASSO solver")]
    NotTall { rows: usize, cols: usize },
    #[error("dictionary is ill-conditioned (condition number {0:e}); use the LASSO solver")]
    IllConditioned(f64),
    #[error("true channel has zero energy")]
    ZeroChannel,
}

pub type Result<T> = core::result::Result<T, Error>;
