use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate Jacobi recurrence at k={k} (alpha={alpha}, beta={beta})")]
    DegenerateRecurrence { k: u32, alpha: f64, beta: f64 },

    #[error("deforming function vanishes near eta={eta}: |xi|={magnitude:e}")]
    XiZero { eta: f64, magnitude: f64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("profile is not a normalized density: {0}")]
    NonNormalizedProfile(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("boundary resampling exhausted on path {path} at step {step}; reduce dt or use the reflect policy")]
    ResampleExhausted { path: usize, step: usize },

    #[error("{escaped} of {total} samples fall outside the histogram range")]
    HistogramEscape { escaped: usize, total: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}
