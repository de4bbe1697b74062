//! TLARS, TLASSO1 and TLASSO2.
//!
//! All three run the ordinary LARS/LASSO path on a surrogate response that
//! lives in the column space of `X`:
//!
//! * TLARS and TLASSO1 use `ŷ = X θ̂_MLE`, whose correlations `Xᵀŷ =
//!   XᵀX θ̂_MLE` carry the whole GLM fit;
//! * TLASSO2 uses `α X θ̃`, the maximizer of the quadratic expansion of the
//!   log-likelihood at the origin, and needs no MLE.
//!
//! Path coefficients are used directly as GLM coefficients: the
//! e-exponential map at the origin is the identity in `θ` coordinates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrix, ResponseVector};
use crate::error::{Error, Result};
use crate::family::GlmFamily;
use crate::lars::{lars_path, LarsMode, SolutionPath};
use crate::mle::{fit_mle, solve_theta_tilde, MleOptions, MleResult};

/// Estimators compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tlars,
    Tlasso1,
    Tlasso2,
    L1,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Tlars, Method::Tlasso1, Method::Tlasso2, Method::L1];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tlars => "tlars",
            Method::Tlasso1 => "tlasso1",
            Method::Tlasso2 => "tlasso2",
            Method::L1 => "l1",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseSource {
    Mle,
    AlphaThetaTilde,
}

/// Surrogate response `Xθ` for some coefficient vector `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualResponse {
    pub values: Vec<f64>,
    pub source: ResponseSource,
}

/// `ŷ = X θ̂`.
pub fn virtual_response(x: &DesignMatrix, theta_hat: &[f64]) -> VirtualResponse {
    VirtualResponse {
        values: x.times(theta_hat),
        source: ResponseSource::Mle,
    }
}

/// TLARS from an already fitted full-model MLE.
pub fn tlars_from_mle(x: &DesignMatrix, mle: &MleResult) -> Result<SolutionPath> {
    path_from_mle(x, mle, LarsMode::Lar)
}

/// TLASSO1 from an already fitted full-model MLE.
pub fn tlasso1_from_mle(x: &DesignMatrix, mle: &MleResult) -> Result<SolutionPath> {
    path_from_mle(x, mle, LarsMode::Lasso)
}

fn path_from_mle(x: &DesignMatrix, mle: &MleResult, mode: LarsMode) -> Result<SolutionPath> {
    if mle.theta_hat.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput(
            "MLE has non-finite coefficients".into(),
        ));
    }
    let response = virtual_response(x, &mle.theta_hat);
    let mut path = lars_path(x, &response.values, mode)?;
    path.separation_flag = mle.separation_flag;
    Ok(path)
}

/// LARS in the tangent space: fit the full-model MLE, then run LARS on
/// `(X, Xθ̂_MLE)`.
pub fn tlars(
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    mle_opts: &MleOptions,
) -> Result<SolutionPath> {
    let mle = fit_mle(x, y, family, mle_opts)?;
    tlars_from_mle(x, &mle)
}

/// LASSO in the tangent space: the LASSO path of `‖Xθ̂_MLE − Xθ‖² + λ‖θ‖₁`.
pub fn tlasso1(
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    mle_opts: &MleOptions,
) -> Result<SolutionPath> {
    let mle = fit_mle(x, y, family, mle_opts)?;
    tlasso1_from_mle(x, &mle)
}

/// The LASSO path of `‖αXθ̃ − Xθ‖² + λ‖θ‖₁` with `XᵀXθ̃ = Xᵀy`.
pub fn tlasso2(x: &DesignMatrix, y: &ResponseVector, family: GlmFamily) -> Result<SolutionPath> {
    family.check_response(y)?;
    let alpha = family.alpha();
    let target: Vec<f64> = solve_theta_tilde(x, y)
        .value()
        .iter()
        .map(|t| alpha * t)
        .collect();
    let response = VirtualResponse {
        values: x.times(&target),
        source: ResponseSource::AlphaThetaTilde,
    };
    lars_path(x, &response.values, LarsMode::Lasso)
}
