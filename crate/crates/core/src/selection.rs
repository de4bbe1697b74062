//! AIC/BIC selection over a sequence of estimates.
//!
//! `AIC = −2 log p + 2d′` and `BIC = −2 log p + d′ log n`, where `d′` is the
//! active-set size. The "1" variants evaluate `log p` at the MLE refitted on
//! each candidate's support, the "2" variants at the path estimate itself.
//! The gaussian log-likelihood omits the same constant for every candidate,
//! so criterion differences are exact.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrix, ResponseVector};
use crate::error::{Error, Result};
use crate::family::GlmFamily;
use crate::l1::L1Path;
use crate::lars::SolutionPath;
use crate::mle::{fit_mle, MleOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Aic,
    Bic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluateAt {
    RefitMle,
    PathEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct CriterionKind {
    pub base: Base,
    pub evaluate_at: EvaluateAt,
}

impl CriterionKind {
    pub const AIC1: Self = Self {
        base: Base::Aic,
        evaluate_at: EvaluateAt::RefitMle,
    };
    pub const AIC2: Self = Self {
        base: Base::Aic,
        evaluate_at: EvaluateAt::PathEstimate,
    };
    pub const BIC1: Self = Self {
        base: Base::Bic,
        evaluate_at: EvaluateAt::RefitMle,
    };
    pub const BIC2: Self = Self {
        base: Base::Bic,
        evaluate_at: EvaluateAt::PathEstimate,
    };
    pub const ALL: [Self; 4] = [Self::AIC1, Self::AIC2, Self::BIC1, Self::BIC2];

    pub fn name(self) -> &'static str {
        match (self.base, self.evaluate_at) {
            (Base::Aic, EvaluateAt::RefitMle) => "aic1",
            (Base::Aic, EvaluateAt::PathEstimate) => "aic2",
            (Base::Bic, EvaluateAt::RefitMle) => "bic1",
            (Base::Bic, EvaluateAt::PathEstimate) => "bic2",
        }
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown criterion {s:?}")))
    }
}

impl From<CriterionKind> for String {
    fn from(c: CriterionKind) -> Self {
        c.name().to_owned()
    }
}

impl TryFrom<String> for CriterionKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Indices (0-based) of the non-zero coefficients.
pub fn active_set(theta: &[f64]) -> Vec<usize> {
    theta
        .iter()
        .enumerate()
        .filter(|(_, t)| **t != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `−2 loglik + 2d′` or `−2 loglik + d′ log n`.
pub fn criterion_value(loglik: f64, d_prime: usize, n: usize, base: Base) -> f64 {
    let penalty = match base {
        Base::Aic => 2.0,
        Base::Bic => (n as f64).ln(),
    };
    -2.0 * loglik + penalty * d_prime as f64
}

/// MLE over the columns in `support`, embedded in `R^d` with zeros
/// elsewhere. An empty support gives the zero vector.
pub fn refit_mle_on_support(
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    support: &[usize],
    opts: &MleOptions,
) -> Result<Vec<f64>> {
    Ok(refit(x, y, family, support, opts)?.theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub loglik: f64,
    pub separation_flag: bool,
}

fn refit(
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    support: &[usize],
    opts: &MleOptions,
) -> Result<Refit> {
    let mut theta = vec![0.0; x.d()];
    if let Some(&bad) = support.iter().find(|&&j| j >= x.d()) {
        return Err(Error::Dimension(format!(
            "support index {bad} out of range for d = {}",
            x.d()
        )));
    }
    if support.is_empty() {
        let zero = vec![0.0; x.n()];
        let intercept = if opts.intercept {
            family.profile_intercept(y.values(), &zero)
        } else {
            0.0
        };
        let eta = vec![intercept; x.n()];
        return Ok(Refit {
            theta,
            intercept,
            loglik: family.loglik_from_eta(y.values(), &eta),
            separation_flag: false,
        });
    }
    let sub = x.select_columns(support);
    let fit = fit_mle(&sub, y, family, opts)?;
    for (&j, &t) in support.iter().zip(&fit.theta_hat) {
        theta[j] = t;
    }
    let eta: Vec<f64> = sub
        .times(&fit.theta_hat)
        .into_iter()
        .map(|t| t + fit.intercept)
        .collect();
    Ok(Refit {
        theta,
        intercept: fit.intercept,
        loglik: family.loglik_from_eta(y.values(), &eta),
        separation_flag: fit.separation_flag,
    })
}

/// A sequence of coefficient vectors to select from.
pub trait Candidates {
    fn candidates(&self) -> Vec<&[f64]>;
}

impl Candidates for SolutionPath {
    fn candidates(&self) -> Vec<&[f64]> {
        self.estimates().collect()
    }
}

impl Candidates for L1Path {
    fn candidates(&self) -> Vec<&[f64]> {
        self.estimates().collect()
    }
}

impl Candidates for [Vec<f64>] {
    fn candidates(&self) -> Vec<&[f64]> {
        self.iter().map(Vec::as_slice).collect()
    }
}

/// Runs of consecutive candidates sharing one support, as
/// `(first index, support)` in path order.
pub fn distinct_supports<P: Candidates + ?Sized>(path: &P) -> Vec<(usize, Vec<usize>)> {
    let mut runs: Vec<(usize, Vec<usize>)> = Vec::new();
    for (k, theta) in path.candidates().into_iter().enumerate() {
        let support = active_set(theta);
        if runs.last().is_none_or(|(_, s)| *s != support) {
            runs.push((k, support));
        }
    }
    runs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub criterion: CriterionKind,
    /// Index into the path of the selected estimate.
    pub chosen_index: usize,
    /// Path index of each evaluated candidate after merging consecutive
    /// duplicate supports.
    pub candidate_indices: Vec<usize>,
    pub criterion_values: Vec<f64>,
    pub d_prime: Vec<usize>,
    /// The path estimate at `chosen_index`.
    pub theta_selected: Vec<f64>,
    /// The support MLE at `chosen_index` for the refit variants.
    pub theta_refit: Option<Vec<f64>>,
    /// Candidates whose refit failed, with the error message.
    pub skipped: Vec<(usize, String)>,
}

impl SelectionResult {
    pub fn chosen_support(&self) -> Vec<usize> {
        active_set(&self.theta_selected)
    }
}

/// Criterion evaluation with a cache of support refits, so that several
/// criteria and several paths over the same data share their MLE fits.
pub struct Selector<'a> {
    x: &'a DesignMatrix,
    y: &'a ResponseVector,
    family: GlmFamily,
    opts: MleOptions,
    refits: HashMap<Vec<usize>, std::result::Result<Refit, String>>,
}

impl<'a> Selector<'a> {
    pub fn new(
        x: &'a DesignMatrix,
        y: &'a ResponseVector,
        family: GlmFamily,
        opts: MleOptions,
    ) -> Self {
        Self {
            x,
            y,
            family,
            opts,
            refits: HashMap::new(),
        }
    }

    pub fn refit(&mut self, support: &[usize]) -> std::result::Result<&Refit, String> {
        let (x, y, family, opts) = (self.x, self.y, self.family, &self.opts);
        self.refits
            .entry(support.to_vec())
            .or_insert_with(|| refit(x, y, family, support, opts).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn path_loglik(&self, theta: &[f64]) -> f64 {
        let eta = self.x.times(theta);
        let b = if self.opts.intercept {
            self.family.profile_intercept(self.y.values(), &eta)
        } else {
            0.0
        };
        let eta: Vec<f64> = eta.into_iter().map(|t| t + b).collect();
        self.family.loglik_from_eta(self.y.values(), &eta)
    }

    pub fn select<P: Candidates + ?Sized>(
        &mut self,
        path: &P,
        kind: CriterionKind,
    ) -> Result<SelectionResult> {
        let thetas = path.candidates();
        if thetas.is_empty() {
            return Err(Error::InvalidInput(
                "cannot select from an empty path".into(),
            ));
        }
        let n = self.x.n();

        // (path index, value, d′) of the best member of each duplicate run.
        let mut evaluated: Vec<(usize, f64, usize)> = Vec::new();
        let mut skipped = Vec::new();
        let mut previous: Option<Vec<usize>> = None;
        for (k, theta) in thetas.iter().enumerate() {
            let support = active_set(theta);
            let d_prime = support.len();
            let loglik = match kind.evaluate_at {
                EvaluateAt::PathEstimate => self.path_loglik(theta),
                EvaluateAt::RefitMle => match self.refit(&support) {
                    Ok(r) => r.loglik,
                    Err(msg) => {
                        skipped.push((k, msg));
                        continue;
                    }
                },
            };
            let value = criterion_value(loglik, d_prime, n, kind.base);
            let same_run = previous.as_ref() == Some(&support);
            match evaluated.last_mut() {
                Some(last) if same_run => {
                    if value < last.1 {
                        *last = (k, value, d_prime);
                    }
                }
                _ => evaluated.push((k, value, d_prime)),
            }
            previous = Some(support);
        }

        let best = evaluated
            .iter()
            .copied()
            .reduce(|best, c| {
                let better = c.1 < best.1 || (c.1 == best.1 && c.2 < best.2);
                if better {
                    c
                } else {
                    best
                }
            })
            .ok_or_else(|| Error::InvalidInput("every candidate refit failed".into()))?;
        let chosen_index = best.0;
        let theta_selected = thetas[chosen_index].to_vec();
        let theta_refit = match kind.evaluate_at {
            EvaluateAt::RefitMle => Some(
                self.refit(&active_set(&theta_selected))
                    .expect("chosen candidate was refitted")
                    .theta
                    .clone(),
            ),
            EvaluateAt::PathEstimate => None,
        };
        Ok(SelectionResult {
            criterion: kind,
            chosen_index,
            candidate_indices: evaluated.iter().map(|c| c.0).collect(),
            criterion_values: evaluated.iter().map(|c| c.1).collect(),
            d_prime: evaluated.iter().map(|c| c.2).collect(),
            theta_selected,
            theta_refit,
            skipped,
        })
    }
}

/// Selects one estimate from `path` by `kind`.
pub fn select<P: Candidates + ?Sized>(
    path: &P,
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    kind: CriterionKind,
    mle_opts: &MleOptions,
) -> Result<SelectionResult> {
    Selector::new(x, y, family, *mle_opts).select(path, kind)
}
