//! Monte Carlo comparison of the path methods under AIC/BIC selection.
//!
//! Every trial draws a standard-normal design, normalizes it, draws responses
//! at the true parameter, runs the configured methods and selects one
//! estimate per criterion. Each trial owns an independent random stream
//! derived from `(base_seed, trial_index)` and results are reduced in trial
//! order, so reports do not depend on the number of workers.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrix, ResponseVector};
use crate::error::{Error, Result};
use crate::family::{mean_response, FamilyKind, GlmFamily};
use crate::l1::{l1_glm_path, L1Options, LambdaGrid};
use crate::lars::SolutionPath;
use crate::mle::{fit_mle, MleOptions};
use crate::selection::{
    active_set, distinct_supports, Candidates, CriterionKind, SelectionResult, Selector,
};
use crate::tangent::{tlars_from_mle, tlasso1_from_mle, tlasso2, Method};

/// Attempts per trial before a degenerate design is reported as a failure.
pub const MAX_ATTEMPTS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CorrelationStructure {
    Independent,
    /// Raw column 3 is replaced by raw column 2 plus `N(0, noise_sd²)` noise.
    BCase {
        noise_sd: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// Mean of `(y − μ̂)²`.
    #[default]
    SquaredError,
    /// Fraction of `y` on the wrong side of `μ̂ = 0.5` (binary responses).
    Misclassification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub d: usize,
    pub n: usize,
    pub theta0: Vec<f64>,
    pub m_trials: usize,
    pub family: FamilyKind,
    pub correlation_structure: CorrelationStructure,
    pub methods: Vec<Method>,
    pub criteria: Vec<CriterionKind>,
    pub base_seed: u64,
    pub ridge: f64,
    #[serde(default)]
    pub error_metric: ErrorMetric,
}

pub const PRESETS: [&str; 6] = ["A1", "A2", "B1", "B2", "C1", "C2"];

impl CaseConfig {
    /// The experiment cases A1–C2 with `m_trials` trials.
    pub fn preset(name: &str, m_trials: usize, base_seed: u64) -> Result<Self> {
        let upper = name.to_ascii_uppercase();
        let (case, size) = match upper.as_bytes() {
            [c @ (b'A' | b'B' | b'C'), s @ (b'1' | b'2')] => (*c, *s),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown case {name:?}, expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        let n = match (case, size) {
            (b'C', b'1') => 500,
            (b'C', _) => 2000,
            (_, b'1') => 100,
            _ => 1000,
        };
        let (theta0, correlation_structure) = match case {
            b'A' => (
                vec![10.0, 10.0, 10.0, -10.0, -10.0, -10.0, 0.0, 0.0, 0.0, 0.0],
                CorrelationStructure::Independent,
            ),
            b'B' => {
                let mut t = vec![0.0; 10];
                t[0] = 10.0;
                t[1] = 10.0;
                (t, CorrelationStructure::BCase { noise_sd: 0.1 })
            }
            _ => {
                let mut t = vec![10.0; 10];
                t.extend([-10.0; 10]);
                t.extend([0.0; 30]);
                (t, CorrelationStructure::Independent)
            }
        };
        Ok(Self {
            d: theta0.len(),
            n,
            theta0,
            m_trials,
            family: FamilyKind::Binomial,
            correlation_structure,
            methods: Method::ALL.to_vec(),
            criteria: CriterionKind::ALL.to_vec(),
            base_seed,
            ridge: 1e-6,
            error_metric: ErrorMetric::SquaredError,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta0.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "theta0 has {} entries, d = {}",
                self.theta0.len(),
                self.d
            )));
        }
        if self.m_trials == 0 {
            return Err(Error::InvalidInput("m_trials must be at least 1".into()));
        }
        if self.n < 2 || self.d == 0 {
            return Err(Error::InvalidInput(format!(
                "need n ≥ 2 and d ≥ 1, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        if let CorrelationStructure::BCase { noise_sd } = self.correlation_structure {
            if !(noise_sd > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "noise_sd must be positive, got {noise_sd}"
                )));
            }
            if self.d < 3 {
                return Err(Error::InvalidInput(
                    "the correlated case needs d ≥ 3".into(),
                ));
            }
        }
        if self.methods.is_empty() || self.criteria.is_empty() {
            return Err(Error::InvalidInput(
                "at least one method and one criterion are required".into(),
            ));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "ridge must be non-negative, got {}",
                self.ridge
            )));
        }
        Ok(())
    }

    pub fn glm_family(&self) -> GlmFamily {
        GlmFamily::from(self.family)
    }

    pub fn true_support(&self) -> Vec<usize> {
        active_set(&self.theta0)
    }

    fn mle_options(&self) -> MleOptions {
        MleOptions {
            ridge: self.ridge,
            ..MleOptions::default()
        }
    }
}

/// Design and responses for fitting plus an independent evaluation set.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub x: DesignMatrix,
    pub y: ResponseVector,
    pub fresh_x: DesignMatrix,
    pub fresh_y: ResponseVector,
    /// Zero-based attempt that produced a full-rank design.
    pub attempt: u64,
}

fn trial_rng(base_seed: u64, trial_index: usize, attempt: u64) -> ChaCha20Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&base_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&attempt.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(seed);
    rng.set_stream(trial_index as u64);
    rng
}

fn draw_design(config: &CaseConfig, rng: &mut ChaCha20Rng) -> Result<DesignMatrix> {
    let (n, d) = (config.n, config.d);
    let mut raw = DMatrix::<f64>::zeros(n, d);
    for j in 0..d {
        for a in 0..n {
            raw[(a, j)] = rng.sample(StandardNormal);
        }
    }
    if let CorrelationStructure::BCase { noise_sd } = config.correlation_structure {
        for a in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            raw[(a, 2)] = raw[(a, 1)] + noise_sd * e;
        }
    }
    DesignMatrix::normalize(&raw, None)
}

fn draw_response(
    config: &CaseConfig,
    x: &DesignMatrix,
    rng: &mut ChaCha20Rng,
) -> Result<ResponseVector> {
    let family = config.glm_family();
    let mu = mean_response(family, x, &config.theta0);
    let values: Vec<f64> = match config.family {
        FamilyKind::Gaussian => mu
            .iter()
            .map(|&m| m + rng.sample::<f64, _>(StandardNormal))
            .collect(),
        FamilyKind::Binomial => mu
            .iter()
            .map(|&m| if rng.random::<f64>() < m { 1.0 } else { 0.0 })
            .collect(),
        FamilyKind::Poisson => mu
            .iter()
            .map(|&m| {
                if m > 0.0 {
                    Poisson::new(m)
                        .map(|p| p.sample(rng))
                        .map_err(|e| Error::NumericalBreakdown(format!("poisson rate {m}: {e}")))
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<_>>()?,
    };
    ResponseVector::new(values, family.domain())
}

/// Draws the data of trial `trial_index`. A rank-deficient draw is replaced
/// by a draw from the next attempt's stream, at most [`MAX_ATTEMPTS`] times.
pub fn generate_trial(config: &CaseConfig, trial_index: usize) -> Result<TrialData> {
    config.validate()?;
    if trial_index >= config.m_trials {
        return Err(Error::InvalidInput(format!(
            "trial index {trial_index} out of range for {} trials",
            config.m_trials
        )));
    }
    let mut last_err = None;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = trial_rng(config.base_seed, trial_index, attempt);
        let drawn = (|| -> Result<TrialData> {
            let x = draw_design(config, &mut rng)?;
            let y = draw_response(config, &x, &mut rng)?;
            let fresh_x = draw_design(config, &mut rng)?;
            let fresh_y = draw_response(config, &fresh_x, &mut rng)?;
            Ok(TrialData {
                x,
                y,
                fresh_x,
                fresh_y,
                attempt,
            })
        })();
        match drawn {
            Ok(data) => return Ok(data),
            Err(e @ (Error::ZeroVarianceColumn { .. } | Error::RankDeficient { .. })) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt was made"))
}

/// Prediction error of `theta_hat` on the evaluation set.
pub fn generalization_error(
    theta_hat: &[f64],
    fresh_x: &DesignMatrix,
    fresh_y: &ResponseVector,
    family: GlmFamily,
) -> f64 {
    generalization_error_with(
        theta_hat,
        fresh_x,
        fresh_y,
        family,
        ErrorMetric::SquaredError,
    )
}

pub fn generalization_error_with(
    theta_hat: &[f64],
    fresh_x: &DesignMatrix,
    fresh_y: &ResponseVector,
    family: GlmFamily,
    metric: ErrorMetric,
) -> f64 {
    let mu = mean_response(family, fresh_x, theta_hat);
    let n = mu.len() as f64;
    match metric {
        ErrorMetric::SquaredError => {
            fresh_y
                .values()
                .iter()
                .zip(&mu)
                .map(|(y, m)| (y - m) * (y - m))
                .sum::<f64>()
                / n
        }
        ErrorMetric::Misclassification => {
            fresh_y
                .values()
                .iter()
                .zip(&mu)
                .filter(|(&y, &m)| (m >= 0.5) != (y >= 0.5))
                .count() as f64
                / n
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub criterion: CriterionKind,
    pub generalization_error: f64,
    pub selected_true_model: bool,
    pub parameter_sq_error: f64,
    pub selected_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub seq_contains_truth: bool,
    pub separation_flag: bool,
    pub path_length: usize,
    pub criteria: Vec<CriterionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial_index: usize,
    pub attempt: u64,
    pub methods: Vec<MethodOutcome>,
    /// Whether TLARS and TLASSO1 produced the same path (when both ran).
    pub tlars_equals_tlasso1: Option<bool>,
}

/// Everything computed for one trial, including the selected estimates.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub summary: TrialSummary,
    pub data: TrialData,
    /// `(method, selection)` in config order.
    pub selections: Vec<(Method, SelectionResult)>,
}

enum FittedPath {
    Lars(SolutionPath),
    L1(crate::l1::L1Path),
}

impl FittedPath {
    fn candidates(&self) -> &dyn Candidates {
        match self {
            FittedPath::Lars(p) => p,
            FittedPath::L1(p) => p,
        }
    }
}

/// Runs every configured method and criterion on trial `trial_index`.
pub fn run_trial(config: &CaseConfig, trial_index: usize) -> Result<TrialOutcome> {
    let data = generate_trial(config, trial_index)?;
    let family = config.glm_family();
    let mle_opts = config.mle_options();
    let truth = config.true_support();
    let (x, y) = (&data.x, &data.y);

    let needs_mle = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::Tlars | Method::Tlasso1));
    let mle = if needs_mle {
        Some(fit_mle(x, y, family, &mle_opts)?)
    } else {
        None
    };

    let mut paths: Vec<(Method, FittedPath)> = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let path = match method {
            Method::Tlars => FittedPath::Lars(tlars_from_mle(x, mle.as_ref().expect("fitted"))?),
            Method::Tlasso1 => {
                FittedPath::Lars(tlasso1_from_mle(x, mle.as_ref().expect("fitted"))?)
            }
            Method::Tlasso2 => FittedPath::Lars(tlasso2(x, y, family)?),
            Method::L1 => {
                let opts = L1Options::default();
                let grid = LambdaGrid::for_data(x, y, family, &opts)?;
                FittedPath::L1(l1_glm_path(x, y, family, &grid, &opts)?)
            }
        };
        paths.push((method, path));
    }

    let tlars_equals_tlasso1 = {
        let find = |m: Method| {
            paths.iter().find_map(|(k, p)| match p {
                FittedPath::Lars(p) if *k == m => Some(p),
                _ => None,
            })
        };
        match (find(Method::Tlars), find(Method::Tlasso1)) {
            (Some(a), Some(b)) => Some(a.same_as(b, 1e-12)),
            _ => None,
        }
    };

    let mut selector = Selector::new(x, y, family, mle_opts);
    let mut methods = Vec::with_capacity(paths.len());
    let mut selections = Vec::new();
    for (method, path) in &paths {
        let candidates = path.candidates();
        let seq_contains_truth = distinct_supports(candidates)
            .iter()
            .any(|(_, s)| *s == truth);
        let (separation_flag, path_length) = match path {
            FittedPath::Lars(p) => (p.separation_flag, p.len()),
            FittedPath::L1(p) => (false, p.len()),
        };
        let mut criteria = Vec::with_capacity(config.criteria.len());
        for &criterion in &config.criteria {
            let sel = selector.select(candidates, criterion)?;
            let support = sel.chosen_support();
            let selected_true_model = support == truth;
            debug_assert!(!selected_true_model || seq_contains_truth);
            criteria.push(CriterionOutcome {
                criterion,
                generalization_error: generalization_error_with(
                    &sel.theta_selected,
                    &data.fresh_x,
                    &data.fresh_y,
                    family,
                    config.error_metric,
                ),
                selected_true_model,
                parameter_sq_error: sel
                    .theta_selected
                    .iter()
                    .zip(&config.theta0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum(),
                selected_size: support.len(),
            });
            selections.push((*method, sel));
        }
        check_bic_not_larger(&criteria, config.n);
        methods.push(MethodOutcome {
            method: *method,
            seq_contains_truth,
            separation_flag,
            path_length,
            criteria,
        });
    }

    Ok(TrialOutcome {
        summary: TrialSummary {
            trial_index,
            attempt: data.attempt,
            methods,
            tlars_equals_tlasso1,
        },
        data,
        selections,
    })
}

/// BIC penalizes harder than AIC once `n > e²`, so with the same candidate
/// log-likelihoods it never selects a larger model.
fn check_bic_not_larger(criteria: &[CriterionOutcome], n: usize) {
    if (n as f64) <= std::f64::consts::E.powi(2) {
        return;
    }
    for (aic, bic) in [
        (CriterionKind::AIC1, CriterionKind::BIC1),
        (CriterionKind::AIC2, CriterionKind::BIC2),
    ] {
        let size = |k| {
            criteria
                .iter()
                .find(|c| c.criterion == k)
                .map(|c| c.selected_size)
        };
        if let (Some(a), Some(b)) = (size(aic), size(bic)) {
            debug_assert!(b <= a, "{bic} selected {b} variables, {aic} selected {a}");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionAggregate {
    pub criterion: CriterionKind,
    pub generalization_mean: Option<f64>,
    pub model_selection_proportion: Option<f64>,
    pub parameter_sq_error_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: Method,
    pub seq_proportion: Option<f64>,
    pub separation_proportion: Option<f64>,
    pub criteria: Vec<CriterionAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub config: CaseConfig,
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    pub failures: Vec<TrialFailure>,
    pub methods: Vec<MethodAggregate>,
    pub tlars_equals_tlasso1_proportion: Option<f64>,
    pub trial_summaries: Vec<TrialSummary>,
}

impl CaseReport {
    pub fn aggregate(
        config: &CaseConfig,
        results: Vec<std::result::Result<TrialSummary, TrialFailure>>,
    ) -> Self {
        let trials = results.len();
        let mut summaries = Vec::new();
        let mut failures = Vec::new();
        for r in results {
            match r {
                Ok(s) => summaries.push(s),
                Err(f) => failures.push(f),
            }
        }

        let mean = |values: &mut dyn Iterator<Item = f64>| -> Option<f64> {
            let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            (count > 0).then(|| sum / count as f64)
        };
        let flag = |b: bool| if b { 1.0 } else { 0.0 };

        let methods = config
            .methods
            .iter()
            .map(|&method| {
                let outcomes: Vec<&MethodOutcome> = summaries
                    .iter()
                    .filter_map(|s| s.methods.iter().find(|m| m.method == method))
                    .collect();
                let criteria = config
                    .criteria
                    .iter()
                    .map(|&criterion| {
                        let per: Vec<&CriterionOutcome> = outcomes
                            .iter()
                            .filter_map(|m| m.criteria.iter().find(|c| c.criterion == criterion))
                            .collect();
                        CriterionAggregate {
                            criterion,
                            generalization_mean: mean(
                                &mut per.iter().map(|c| c.generalization_error),
                            ),
                            model_selection_proportion: mean(
                                &mut per.iter().map(|c| flag(c.selected_true_model)),
                            ),
                            parameter_sq_error_mean: mean(
                                &mut per.iter().map(|c| c.parameter_sq_error),
                            ),
                        }
                    })
                    .collect();
                MethodAggregate {
                    method,
                    seq_proportion: mean(&mut outcomes.iter().map(|m| flag(m.seq_contains_truth))),
                    separation_proportion: mean(
                        &mut outcomes.iter().map(|m| flag(m.separation_flag)),
                    ),
                    criteria,
                }
            })
            .collect();
        let tlars_equals_tlasso1_proportion = mean(
            &mut summaries
                .iter()
                .filter_map(|s| s.tlars_equals_tlasso1)
                .map(flag),
        );

        CaseReport {
            config: config.clone(),
            trials,
            completed: summaries.len(),
            failed: failures.len(),
            failures,
            methods,
            tlars_equals_tlasso1_proportion,
            trial_summaries: summaries,
        }
    }

    pub fn method(&self, method: Method) -> Option<&MethodAggregate> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn criterion(
        &self,
        method: Method,
        criterion: CriterionKind,
    ) -> Option<&CriterionAggregate> {
        self.method(method)?
            .criteria
            .iter()
            .find(|c| c.criterion == criterion)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One row per method with the criteria as column groups.
    pub fn to_table(&self) -> String {
        let crits: Vec<CriterionKind> = self.config.criteria.clone();
        let fmt = |v: Option<f64>, digits: usize| {
            v.map_or_else(|| "-".to_owned(), |v| format!("{v:.digits$}"))
        };
        let group = |title: &str| {
            let width = crits.len() * 11 - 1;
            format!("{title:^width$}")
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "trials {}  completed {}  failed {}  n {}  d {}  family {}",
            self.trials,
            self.completed,
            self.failed,
            self.config.n,
            self.config.d,
            self.config.family
        );
        let _ = writeln!(
            out,
            "{:<8} | {} | {:>7} | {} | {}",
            "",
            group("generalization"),
            "",
            group("model selection"),
            group("parameter estimation")
        );
        let names: Vec<String> = crits
            .iter()
            .map(|c| format!("{:>10}", c.name().to_uppercase()))
            .collect();
        let _ = writeln!(
            out,
            "{:<8} | {} | {:>7} | {} | {}",
            "method",
            names.join(" "),
            "Seq",
            names.join(" "),
            names.join(" ")
        );
        for m in &self.methods {
            let cell = |f: &dyn Fn(&CriterionAggregate) -> Option<f64>, digits: usize| {
                crits
                    .iter()
                    .map(|&k| {
                        let v = m.criteria.iter().find(|c| c.criterion == k).and_then(f);
                        format!("{:>10}", fmt(v, digits))
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let _ = writeln!(
                out,
                "{:<8} | {} | {:>7} | {} | {}",
                m.method.name().to_uppercase(),
                cell(&|c| c.generalization_mean, 5),
                fmt(m.seq_proportion, 4),
                cell(&|c| c.model_selection_proportion, 4),
                cell(&|c| c.parameter_sq_error_mean, 2)
            );
        }
        if let Some(p) = self.tlars_equals_tlasso1_proportion {
            let _ = writeln!(
                out,
                "TLARS and TLASSO1 paths identical in {:.4} of trials",
                p
            );
        }
        out
    }

    /// Long format: one row per (method, criterion).
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(crate::data::format_float).unwrap_or_default();
        let mut out = String::from(
            "method,criterion,generalization,model_selection,parameter_estimation,seq,separation\n",
        );
        for m in &self.methods {
            for c in &m.criteria {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    m.method,
                    c.criterion,
                    opt(c.generalization_mean),
                    opt(c.model_selection_proportion),
                    opt(c.parameter_sq_error_mean),
                    opt(m.seq_proportion),
                    opt(m.separation_proportion)
                );
            }
        }
        out
    }
}

/// Runs all trials on `workers` threads (`None` uses rayon's default) and
/// aggregates them. Failed trials are recorded, not fatal.
pub fn run_case(config: &CaseConfig, workers: Option<usize>) -> Result<CaseReport> {
    config.validate()?;
    let run = || -> Vec<std::result::Result<TrialSummary, TrialFailure>> {
        (0..config.m_trials)
            .into_par_iter()
            .map(|t| {
                run_trial(config, t)
                    .map(|o| o.summary)
                    .map_err(|e| TrialFailure {
                        trial_index: t,
                        message: e.to_string(),
                    })
            })
            .collect()
    };
    let results = match workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(CaseReport::aggregate(config, results))
}
