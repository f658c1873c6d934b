use thiserror::Error;

/// Errors produced by the identification library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KbhError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("basis function {index} is not finite at sample t = {sample}")]
    NonFiniteBasis { sample: usize, index: usize },

    #[error("Cholesky factorization of the stable-spline kernel failed (beta = {beta}, n = {n})")]
    KernelFactorization { beta: f64, n: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("coefficient system is singular: {0}")]
    SingularCoefficients(String),

    #[error("EM iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<KbhError>,
    },
}

pub type Result<T> = std::result::Result<T, KbhError>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(KbhError::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
