//! Parameters of the linear skew product and their validation.
//!
//! The skew product acts on `{0,1}^Z × R` by shifting the base sequence and
//! scaling the fiber coordinate by `lambda0` or `lambda1` according to the
//! current symbol. For noise amplitudes below one the symbolic coordinate of a
//! pseudotrajectory cannot change its 0th symbol, so the symbol sequence of a
//! random pseudotrajectory is an i.i.d. fair-coin sequence and all shadowing
//! questions reduce to the scalar fiber recursion
//!
//! ```text
//! x_{k+1} = lambda_{t_k} x_k + d r_{k+1},   r_k ~ Uniform[-1, 1]
//! ```
//!
//! The base shift's own shadowing only changes constants, so no object for
//! the symbolic space is kept here.

use thiserror::Error;

/// Minimum admissible `|ln lambda0 + ln lambda1|`.
pub const DRIFT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("lambda0 and lambda1 must be finite (got lambda0={lambda0}, lambda1={lambda1})")]
    NonFinite { lambda0: f64, lambda1: f64 },
    #[error("constraint 0 < lambda0 < 1 violated (lambda0={0})")]
    ContractionOutOfRange(f64),
    #[error("constraint lambda1 > 1 violated (lambda1={0})")]
    ExpansionOutOfRange(f64),
    #[error(
        "constraint lambda0*lambda1 != 1 violated (lambda0*lambda1={product}, |ln lambda0 + ln lambda1|={drift_gap:e} < {DRIFT_TOLERANCE:e})"
    )]
    DegenerateDrift { product: f64, drift_gap: f64 },
}

/// Validated fiber multipliers together with their logarithms.
///
/// `a0 = ln lambda0 < 0 < a1 = ln lambda1` and `v = (a0 + a1) / 2` is the
/// mean increment of the driving random walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    lambda0: f64,
    lambda1: f64,
    a0: f64,
    a1: f64,
    v: f64,
}

impl ModelParams {
    /// Checks `0 < lambda0 < 1 < lambda1` and `lambda0 * lambda1 != 1`.
    pub fn validate(lambda0: f64, lambda1: f64) -> Result<Self, ModelError> {
        if !lambda0.is_finite() || !lambda1.is_finite() {
            return Err(ModelError::NonFinite { lambda0, lambda1 });
        }
        if !(lambda0 > 0.0 && lambda0 < 1.0) {
            return Err(ModelError::ContractionOutOfRange(lambda0));
        }
        if !(lambda1 > 1.0) {
            return Err(ModelError::ExpansionOutOfRange(lambda1));
        }
        let a0 = lambda0.ln();
        let a1 = lambda1.ln();
        let drift_gap = (a0 + a1).abs();
        if drift_gap < DRIFT_TOLERANCE {
            return Err(ModelError::DegenerateDrift {
                product: lambda0 * lambda1,
                drift_gap,
            });
        }
        Ok(Self::from_parts(lambda0, lambda1, a0, a1))
    }

    fn from_parts(lambda0: f64, lambda1: f64, a0: f64, a1: f64) -> Self {
        Self {
            lambda0,
            lambda1,
            a0,
            a1,
            v: (a0 + a1) / 2.0,
        }
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// `ln lambda0`, the (negative) contracting increment.
    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// `ln lambda1`, the (positive) expanding increment.
    pub fn a1(&self) -> f64 {
        self.a1
    }

    /// Mean increment `(a0 + a1) / 2`.
    pub fn drift(&self) -> f64 {
        self.v
    }

    /// Fiber multiplier selected by a symbol (`false` → lambda0).
    #[inline]
    pub fn multiplier(&self, symbol: bool) -> f64 {
        if symbol {
            self.lambda1
        } else {
            self.lambda0
        }
    }

    /// Log-multiplier selected by a symbol (`false` → a0).
    #[inline]
    pub fn log_multiplier(&self, symbol: bool) -> f64 {
        if symbol {
            self.a1
        } else {
            self.a0
        }
    }

    /// Parameters of the inverse map: `(1/lambda1, 1/lambda0)`.
    ///
    /// The log-rates are negated and swapped exactly, so inverting twice
    /// restores `a0`, `a1` and `v` bit for bit.
    pub fn inverse(&self) -> Self {
        Self::from_parts(1.0 / self.lambda1, 1.0 / self.lambda0, -self.a1, -self.a0)
    }

    pub fn normalize(&self) -> NormalizedParams {
        normalize(*self)
    }
}

/// Parameters with positive drift, plus whether the inverse map was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedParams {
    params: ModelParams,
    inverted: bool,
}

impl NormalizedParams {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn inverted(&self) -> bool {
        self.inverted
    }
}

impl std::ops::Deref for NormalizedParams {
    type Target = ModelParams;

    fn deref(&self) -> &ModelParams {
        &self.params
    }
}

/// Maps a parameter pair to the equivalent one with positive drift.
///
/// Shadowing for `f` and `f^{-1}` are equivalent problems, so negative-drift
/// parameters are replaced by those of the inverse map.
pub fn normalize(params: ModelParams) -> NormalizedParams {
    if params.v > 0.0 {
        NormalizedParams {
            params,
            inverted: false,
        }
    } else {
        NormalizedParams {
            params: params.inverse(),
            inverted: true,
        }
    }
}

impl From<NormalizedParams> for ModelParams {
    fn from(n: NormalizedParams) -> Self {
        n.params
    }
}
