use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value is not finite: {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("point {point} lies inside the guard radius {radius}")]
    GuardViolation { point: Complex64, radius: f64 },

    #[error("zero denominator at {0}")]
    ZeroDenominator(&'static str),

    #[error("pole at {0}")]
    Pole(Complex64),

    #[error("point {0} is within the branch-cut exclusion zone")]
    BranchCut(Complex64),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("seed factor is rank deficient and inconsistent (residual {residual:e})")]
    DegenerateSeed { residual: f64 },

    #[error("chain history has {have} steps, {need} required")]
    InsufficientHistory { have: usize, need: usize },

    #[error("point {point} does not satisfy the series radius {radius}")]
    SeriesRadius { point: Complex64, radius: f64 },

    #[error("need at least {need} sample points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("test function `{0}` is not harmonic")]
    NonHarmonic(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn ensure_finite(z: Complex64, what: &'static str) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
