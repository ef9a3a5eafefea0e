use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JacError {
    #[error("{op}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("singular matrix: pivot magnitude {pivot:e} below threshold")]
    Singular { pivot: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The adaptive integrator ran out of steps. Carries the state reached so
    /// far and the last scaled error estimate.
    #[error(
        "integrator did not converge after {steps} steps (reached t = {t_reached}, error estimate {error_estimate:e})"
    )]
    NonConvergence {
        best: Vec<f64>,
        t_reached: f64,
        error_estimate: f64,
        steps: usize,
    },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, JacError>;

impl JacError {
    /// True for failures that come from the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            JacError::Singular { .. } | JacError::NonFinite(_) | JacError::NonConvergence { .. }
        )
    }
}

pub(crate) fn check_dim(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(JacError::DimensionMismatch {
            op,
            expected,
            found,
        })
    }
}
