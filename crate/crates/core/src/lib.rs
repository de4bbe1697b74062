//! Sparse estimation for generalized linear models in the tangent space at
//! the origin.
//!
//! The Fisher metric of a canonical-link GLM at `θ = 0` is proportional to
//! the correlation matrix `XᵀX`, so the classical LARS/LASSO machinery can be
//! run on a surrogate response whose correlations with the predictors encode
//! the GLM fit. Three estimators are provided:
//!
//! * [`tangent::tlars`]: LARS on the virtual response `X θ̂_MLE`;
//! * [`tangent::tlasso1`]: the LASSO variant of the same path;
//! * [`tangent::tlasso2`]: LASSO on `α X θ̃`, which needs no MLE at all.
//!
//! An ℓ1-penalized likelihood baseline ([`l1`]), AIC/BIC model selection
//! ([`selection`]) and a seeded Monte Carlo harness ([`harness`]) complete the
//! crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod export;
pub mod family;
pub mod harness;
pub mod l1;
pub mod lars;
pub mod linalg;
pub mod mle;
pub mod selection;
pub mod tangent;

pub use data::{DesignMatrix, FamilyDomain, GramMatrix, ResponseVector};
pub use error::{Error, Result};
pub use family::{FamilyKind, GlmFamily};
pub use l1::{L1Options, L1Path, LambdaGrid};
pub use lars::{LarsMode, LarsState, SolutionPath};
pub use mle::{MleOptions, MleResult, ThetaTilde};
pub use selection::{CriterionKind, SelectionResult};
pub use tangent::Method;
