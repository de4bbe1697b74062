//! Canonical-link exponential families.
//!
//! With the canonical link the log-likelihood `log p(y|θ) = yᵀXθ − ψ(θ)`
//! is determined by the per-sample cumulant `b(η)`: `ψ(θ) = Σₐ b(ηₐ)` with
//! `η = Xθ`, the mean is `b′(η)` (the inverse link) and the Fisher weight is
//! `b″(η)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrix, FamilyDomain, ResponseVector};
use crate::error::{Error, Result};

/// Linear predictors are clamped to `[-ETA_CLAMP, ETA_CLAMP]` before `exp`.
pub const ETA_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Gaussian,
    Binomial,
    Poisson,
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(FamilyKind::Gaussian),
            "binomial" | "logistic" => Ok(FamilyKind::Binomial),
            "poisson" => Ok(FamilyKind::Poisson),
            other => Err(Error::InvalidInput(format!("unknown family {other:?}"))),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Binomial => "binomial",
            FamilyKind::Poisson => "poisson",
        })
    }
}

/// Canonical-link family descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GlmFamily {
    kind: FamilyKind,
}

impl From<FamilyKind> for GlmFamily {
    fn from(kind: FamilyKind) -> Self {
        Self { kind }
    }
}

impl GlmFamily {
    pub const GAUSSIAN: GlmFamily = GlmFamily {
        kind: FamilyKind::Gaussian,
    };
    pub const BINOMIAL: GlmFamily = GlmFamily {
        kind: FamilyKind::Binomial,
    };
    pub const POISSON: GlmFamily = GlmFamily {
        kind: FamilyKind::Poisson,
    };

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Response support the family can model.
    pub fn domain(&self) -> FamilyDomain {
        match self.kind {
            FamilyKind::Gaussian => FamilyDomain::Real,
            FamilyKind::Binomial => FamilyDomain::Binary01,
            FamilyKind::Poisson => FamilyDomain::NonnegInteger,
        }
    }

    /// `h⁻¹(t)`: mean as a function of the linear predictor.
    pub fn inverse_link(&self, t: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => t,
            FamilyKind::Binomial => {
                let t = clamp(t);
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            FamilyKind::Poisson => clamp(t).exp(),
        }
    }

    /// `h̃(t) = (h⁻¹)′(t)`, also the variance function at the mean.
    pub fn inverse_link_derivative(&self, t: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Binomial => {
                let p = self.inverse_link(t);
                p * (1.0 - p)
            }
            FamilyKind::Poisson => clamp(t).exp(),
        }
    }

    /// `α = 1 / h̃(0)`.
    pub fn alpha(&self) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Binomial => 4.0,
            FamilyKind::Poisson => 1.0,
        }
    }

    /// Per-sample cumulant `b(t)`, so that `ψ(θ) = Σₐ b(ηₐ)`.
    pub fn cumulant(&self, t: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 0.5 * t * t,
            // log(1 + eᵗ) without overflow.
            FamilyKind::Binomial => t.max(0.0) + (-t.abs()).exp().ln_1p(),
            FamilyKind::Poisson => clamp(t).exp(),
        }
    }

    /// Checks that `y` lies in the family's support.
    pub fn check_response(&self, y: &ResponseVector) -> Result<()> {
        let domain = self.domain();
        for (row, &value) in y.values().iter().enumerate() {
            if !domain.admits(value) {
                return Err(Error::Domain {
                    expected: match domain {
                        FamilyDomain::Real => "real",
                        FamilyDomain::Binary01 => "binary01",
                        FamilyDomain::NonnegInteger => "nonneg_integer",
                    },
                    row,
                    value,
                });
            }
        }
        Ok(())
    }

    pub fn potential_from_eta(&self, eta: &[f64]) -> f64 {
        eta.iter().map(|&t| self.cumulant(t)).sum()
    }

    /// `yᵀη − Σ b(ηₐ)`.
    pub fn loglik_from_eta(&self, y: &[f64], eta: &[f64]) -> f64 {
        assert_eq!(y.len(), eta.len());
        y.iter()
            .zip(eta)
            .map(|(&ya, &t)| ya * t - self.cumulant(t))
            .sum()
    }

    /// Maximizes the log-likelihood over an additive intercept `b` with the
    /// linear predictor `eta + b`.
    pub fn profile_intercept(&self, y: &[f64], eta: &[f64]) -> f64 {
        let n = y.len() as f64;
        match self.kind {
            FamilyKind::Gaussian => y.iter().zip(eta).map(|(a, t)| a - t).sum::<f64>() / n,
            FamilyKind::Poisson => {
                let sy: f64 = y.iter().sum();
                let se: f64 = eta.iter().map(|&t| clamp(t).exp()).sum();
                if sy <= 0.0 {
                    -ETA_CLAMP
                } else {
                    (sy / se).ln()
                }
            }
            FamilyKind::Binomial => {
                // Concave in b; safeguarded Newton inside a shrinking bracket.
                let score = |b: f64| -> f64 {
                    y.iter()
                        .zip(eta)
                        .map(|(&ya, &t)| ya - self.inverse_link(t + b))
                        .sum()
                };
                let (mut lo, mut hi) = (-ETA_CLAMP, ETA_CLAMP);
                let mut b = 0.0;
                for _ in 0..200 {
                    let s = score(b);
                    if s.abs() < 1e-12 * n.max(1.0) {
                        break;
                    }
                    if s > 0.0 {
                        lo = b;
                    } else {
                        hi = b;
                    }
                    let w: f64 = eta
                        .iter()
                        .map(|&t| self.inverse_link_derivative(t + b))
                        .sum();
                    let mut next = b + s / w.max(1e-300);
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - b).abs() < 1e-14 * (1.0 + b.abs()) {
                        b = next;
                        break;
                    }
                    b = next;
                }
                b
            }
        }
    }
}

impl fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

fn clamp(t: f64) -> f64 {
    t.clamp(-ETA_CLAMP, ETA_CLAMP)
}

/// `μ(θ) = h⁻¹(Xθ)` componentwise.
pub fn mean_response(family: GlmFamily, x: &DesignMatrix, theta: &[f64]) -> Vec<f64> {
    x.times(theta)
        .into_iter()
        .map(|t| family.inverse_link(t))
        .collect()
}

/// `ψ(θ) = Σₐ b((Xθ)ₐ)`. The gaussian cumulant `½η²` gives `½θᵀXᵀXθ`.
pub fn potential(family: GlmFamily, x: &DesignMatrix, theta: &[f64]) -> f64 {
    family.potential_from_eta(&x.times(theta))
}

/// `log p(y|θ) = yᵀXθ − ψ(θ)`.
///
/// Data-only terms are omitted: `−½yᵀy − (n/2)log 2π` for the gaussian family
/// (unit variance) and `−Σ log yₐ!` for poisson. Only differences in `θ`
/// matter anywhere in this crate.
pub fn log_likelihood(
    family: GlmFamily,
    x: &DesignMatrix,
    y: &ResponseVector,
    theta: &[f64],
) -> f64 {
    assert_eq!(x.n(), y.len());
    family.loglik_from_eta(y.values(), &x.times(theta))
}

/// Like [`log_likelihood`] with an extra intercept added to every linear
/// predictor.
pub fn log_likelihood_with_intercept(
    family: GlmFamily,
    x: &DesignMatrix,
    y: &ResponseVector,
    theta: &[f64],
    intercept: f64,
) -> f64 {
    let eta: Vec<f64> = x.times(theta).into_iter().map(|t| t + intercept).collect();
    family.loglik_from_eta(y.values(), &eta)
}

/// `Xᵀ(y − μ(θ))`, the score of the log-likelihood.
pub fn score(family: GlmFamily, x: &DesignMatrix, y: &ResponseVector, theta: &[f64]) -> Vec<f64> {
    let mu = mean_response(family, x, theta);
    let resid: Vec<f64> = y.values().iter().zip(&mu).map(|(a, m)| a - m).collect();
    x.transpose_times(&resid)
}

/// Fisher metric `G(θ) = Xᵀ diag(h̃(Xθ)) X`, i.e. the Hessian of `ψ`.
pub fn fisher_metric(family: GlmFamily, x: &DesignMatrix, theta: &[f64]) -> DMatrix<f64> {
    let weights: Vec<f64> = x
        .times(theta)
        .into_iter()
        .map(|t| family.inverse_link_derivative(t))
        .collect();
    weighted_gram(x.values(), &weights)
}

/// `Xᵀ diag(w) X`, symmetrized.
pub fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let (n, d) = x.shape();
    assert_eq!(w.len(), n);
    let mut xw = x.clone();
    for j in 0..d {
        for a in 0..n {
            xw[(a, j)] *= w[a];
        }
    }
    let g = x.tr_mul(&xw);
    (&g + g.transpose()) * 0.5
}
