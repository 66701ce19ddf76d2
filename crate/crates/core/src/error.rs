use thiserror::Error;

use crate::quadrature::QuadError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {point:?} lies outside the planform")]
    OutsidePlanform { point: Vec<f64> },

    #[error("kernel `{kernel}` is valid for base dimension <= {kernel_dim}, profile has {profile_dim}")]
    DimensionMismatch {
        kernel: String,
        kernel_dim: usize,
        profile_dim: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("correlation function is not normalized: integral of u*g(u) is {computed}, expected 2*pi = {expected}")]
    Normalization { computed: f64, expected: f64 },

    #[error("sheet order violated at {point:?}: near sheet {near} above far sheet {far}")]
    SheetOrder { point: Vec<f64>, near: f64, far: f64 },

    #[error("empty height bins inside the fit window [{lo}, {hi}]")]
    EmptyBins { lo: f64, hi: f64 },

    #[error("tail integral of E_par diverges (decay exponent {exponent} <= 1)")]
    DivergentTail { exponent: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("profile data: {0}")]
    Data(String),

    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_) | Error::Fit(_) | Error::DivergentTail { .. }
        )
    }
}
