//! Least angle regression and its LASSO modification.
//!
//! The path is computed from the Gram matrix `G = XᵀX` and the correlations
//! `Xᵀr` alone: at any `θ` the residual correlations are `ĉ = Xᵀr − Gθ`.
//! Starting from `θ = 0`, the variables with the largest `|ĉ|` form the
//! active set and `θ` moves along the equiangular direction, which lowers all
//! active `|ĉᵢ|` at the same rate `A`, until an inactive correlation catches
//! up. In LASSO mode a variable whose coefficient reaches zero first leaves
//! the active set instead.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrix, GramMatrix};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, GrowingCholesky};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LarsMode {
    /// Plain least angle regression: variables only ever enter.
    Lar,
    /// LASSO path: a variable leaves when its coefficient crosses zero.
    Lasso,
}

/// The move that produced a breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// `A = (1ᵀG_A⁻¹1)^{-1/2}` for the signed active Gram matrix.
    pub equiangular: f64,
    /// Equiangular weights over the active set, in active-set order.
    pub w: Vec<f64>,
    /// `a = XᵀX_A w`: rate of change of every correlation along the step.
    pub a: Vec<f64>,
    pub gamma: f64,
    /// Coefficient direction `δ` (`δᵢ = sᵢwᵢ` on the active set, 0 elsewhere).
    pub direction: Vec<f64>,
    pub entered: Vec<usize>,
    pub dropped: Option<usize>,
}

/// One breakpoint of the path.
#[derive(Debug, Clone, PartialEq)]
pub struct LarsState {
    pub k: usize,
    pub theta: Vec<f64>,
    /// Active set after this breakpoint, in order of entry.
    pub active: Vec<usize>,
    /// Correlation signs, aligned with `active`.
    pub signs: Vec<f64>,
    pub residual_corr: Vec<f64>,
    pub max_corr: f64,
    /// `None` for the initial state.
    pub step: Option<StepInfo>,
}

impl LarsState {
    /// Penalty level of the `‖r − Xθ‖² + λ‖θ‖₁` objective at this point.
    pub fn lambda(&self) -> f64 {
        2.0 * self.max_corr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub breakpoints: Vec<LarsState>,
    pub mode: LarsMode,
    pub terminal_theta: Vec<f64>,
    /// Set when the response came from a ridge-stabilized MLE.
    pub separation_flag: bool,
}

impl SolutionPath {
    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.terminal_theta.len()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.breakpoints.iter().map(LarsState::lambda).collect()
    }

    pub fn estimates(&self) -> impl Iterator<Item = &[f64]> {
        self.breakpoints.iter().map(|b| b.theta.as_slice())
    }

    /// Coefficients at penalty `lambda` (on the `2Ĉ` scale), interpolating
    /// linearly between breakpoints.
    pub fn coefficients_at(&self, lambda: f64) -> Vec<f64> {
        let first = &self.breakpoints[0];
        if lambda >= first.lambda() {
            return first.theta.clone();
        }
        for pair in self.breakpoints.windows(2) {
            let (hi, lo) = (&pair[0], &pair[1]);
            if lambda >= lo.lambda() {
                let span = hi.lambda() - lo.lambda();
                let t = if span > 0.0 {
                    (hi.lambda() - lambda) / span
                } else {
                    1.0
                };
                return hi
                    .theta
                    .iter()
                    .zip(&lo.theta)
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
            }
        }
        self.terminal_theta.clone()
    }

    /// Identical breakpoint coefficients (within `tol`).
    pub fn same_as(&self, other: &SolutionPath, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .breakpoints
                .iter()
                .zip(&other.breakpoints)
                .all(|(a, b)| {
                    a.theta
                        .iter()
                        .zip(&b.theta)
                        .all(|(x, y)| (x - y).abs() <= tol)
                })
    }
}

/// Equiangular quantities for a signed active Gram matrix `G_A`
/// (entries `sᵢsⱼxᵢᵀxⱼ`): `A = (1ᵀG_A⁻¹1)^{-1/2}` and `w = A G_A⁻¹ 1`.
pub fn equiangular(signed_gram: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let k = signed_gram.nrows();
    if k == 0 || signed_gram.ncols() != k {
        return Err(Error::Dimension(
            "equiangular needs a non-empty square matrix".into(),
        ));
    }
    let mut chol = GrowingCholesky::new();
    for i in 0..k {
        let cross: Vec<f64> = (0..i).map(|j| signed_gram[(i, j)]).collect();
        chol.push(&cross, signed_gram[(i, i)])?;
    }
    equiangular_from_factor(&chol)
}

fn equiangular_from_factor(chol: &GrowingCholesky) -> Result<(f64, Vec<f64>)> {
    let z = chol.solve(&vec![1.0; chol.len()]);
    let total: f64 = z.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NumericalBreakdown(format!(
            "1ᵀG⁻¹1 = {total:.3e} is not positive"
        )));
    }
    let a = total.powf(-0.5);
    Ok((a, z.into_iter().map(|v| a * v).collect()))
}

/// Result of the entering-variable search.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub gamma: f64,
    /// Entering indices with the sign their correlation has on arrival.
    pub entering: Vec<(usize, f64)>,
}

/// `γ̂ = min⁺ⱼ {(C − ĉⱼ)/(A − aⱼ), (C + ĉⱼ)/(A + aⱼ)}` over the inactive set,
/// capped at `C/A` (where all active correlations reach zero). With no
/// inactive variables the step is exactly `C/A`.
pub fn step_length(c_max: f64, a_eq: f64, corr: &[f64], a: &[f64], inactive: &[usize]) -> Step {
    step_length_skipping(c_max, a_eq, corr, a, inactive, None)
}

/// As [`step_length`], ignoring the crossing of `skip.0` with sign `skip.1`
/// (the variable that just left the active set sits exactly on that line).
fn step_length_skipping(
    c_max: f64,
    a_eq: f64,
    corr: &[f64],
    a: &[f64],
    inactive: &[usize],
    skip: Option<(usize, f64)>,
) -> Step {
    let terminal = c_max / a_eq;
    let floor = 1e-14 * terminal;
    let mut gamma = terminal;
    let mut candidates: Vec<(usize, f64, f64)> = Vec::with_capacity(inactive.len());
    for &j in inactive {
        let plus = (c_max - corr[j]) / (a_eq - a[j]);
        let minus = (c_max + corr[j]) / (a_eq + a[j]);
        let mut best: Option<(f64, f64)> = None;
        for (cand, sign) in [(plus, 1.0), (minus, -1.0)] {
            if skip == Some((j, sign)) {
                continue;
            }
            if cand.is_finite() && cand > floor && best.is_none_or(|(b, _)| cand < b) {
                best = Some((cand, sign));
            }
        }
        if let Some((cand, sign)) = best {
            candidates.push((j, cand, sign));
            gamma = gamma.min(cand);
        }
    }
    let tol = 1e-12 * (1.0 + gamma);
    let entering = candidates
        .into_iter()
        .filter(|&(_, cand, _)| cand <= gamma + tol)
        .map(|(j, _, sign)| (j, sign))
        .collect();
    Step { gamma, entering }
}

/// First zero crossing `γ̃ᵢ = −θᵢ/δᵢ > 0` among active coefficients, if it
/// comes before `gamma_hat`. Returns the crossing and the position within
/// the given slices.
pub fn lasso_drop(theta_active: &[f64], direction: &[f64], gamma_hat: f64) -> Option<(f64, usize)> {
    assert_eq!(theta_active.len(), direction.len());
    let mut best: Option<(f64, usize)> = None;
    for (pos, (&t, &d)) in theta_active.iter().zip(direction).enumerate() {
        if t == 0.0 || d == 0.0 {
            continue;
        }
        let crossing = -t / d;
        if crossing > 0.0 && crossing < gamma_hat && best.is_none_or(|(b, _)| crossing < b) {
            best = Some((crossing, pos));
        }
    }
    best
}

/// LARS / LASSO path for `(X, response)`.
pub fn lars_path(x: &DesignMatrix, response: &[f64], mode: LarsMode) -> Result<SolutionPath> {
    if response.len() != x.n() {
        return Err(Error::Dimension(format!(
            "response has {} entries, design has {} rows",
            response.len(),
            x.n()
        )));
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "response contains non-finite values".into(),
        ));
    }
    let xty = x.transpose_times(response);
    lars_path_from_correlations(x.gram(), &xty, mode)
}

/// LARS / LASSO path from `XᵀX` and `Xᵀr` only.
pub fn lars_path_from_correlations(
    gram: &GramMatrix,
    xty: &[f64],
    mode: LarsMode,
) -> Result<SolutionPath> {
    let d = gram.dim();
    if xty.len() != d {
        return Err(Error::Dimension(format!(
            "{} correlations for {d} predictors",
            xty.len()
        )));
    }
    if xty.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite correlations".into()));
    }

    let mut theta = vec![0.0; d];
    let mut corr = xty.to_vec();
    let mut c_max = max_abs(&corr);
    let c_start = c_max;

    if c_max == 0.0 {
        let state = LarsState {
            k: 0,
            theta: theta.clone(),
            active: Vec::new(),
            signs: Vec::new(),
            residual_corr: corr,
            max_corr: 0.0,
            step: None,
        };
        return Ok(SolutionPath {
            breakpoints: vec![state],
            mode,
            terminal_theta: theta,
            separation_flag: false,
        });
    }

    let tie = 1e-12 * (1.0 + c_max);
    let mut active: Vec<usize> = (0..d).filter(|&j| corr[j].abs() >= c_max - tie).collect();
    let mut signs: Vec<f64> = active.iter().map(|&j| corr[j].signum()).collect();
    let mut in_active = vec![false; d];
    let mut chol = GrowingCholesky::new();
    for (pos, &j) in active.iter().enumerate() {
        in_active[j] = true;
        push_signed(
            &mut chol,
            gram,
            &active[..pos],
            &signs[..pos],
            j,
            signs[pos],
        )?;
    }

    let mut breakpoints = vec![LarsState {
        k: 0,
        theta: theta.clone(),
        active: active.clone(),
        signs: signs.clone(),
        residual_corr: corr.clone(),
        max_corr: c_max,
        step: None,
    }];

    // A LASSO path can revisit supports; bound the work generously.
    let max_steps = 16 * d + 64;
    let mut just_dropped: Option<(usize, f64)> = None;
    loop {
        if breakpoints.len() > max_steps {
            return Err(Error::NumericalBreakdown(format!(
                "path did not terminate within {max_steps} steps"
            )));
        }
        let (a_eq, w) = equiangular_from_factor(&chol)?;
        let mut direction = vec![0.0; d];
        for (pos, &i) in active.iter().enumerate() {
            direction[i] = signs[pos] * w[pos];
        }
        let a = gram.times(&direction);

        let inactive: Vec<usize> = (0..d).filter(|&j| !in_active[j]).collect();
        let mut step = step_length_skipping(c_max, a_eq, &corr, &a, &inactive, just_dropped);
        let mut dropped = None;
        if mode == LarsMode::Lasso {
            let theta_active: Vec<f64> = active.iter().map(|&i| theta[i]).collect();
            let dir_active: Vec<f64> = active.iter().map(|&i| direction[i]).collect();
            if let Some((gamma_tilde, pos)) = lasso_drop(&theta_active, &dir_active, step.gamma) {
                step = Step {
                    gamma: gamma_tilde,
                    entering: Vec::new(),
                };
                dropped = Some(pos);
            }
        }
        let gamma = step.gamma;

        for (t, dlt) in theta.iter_mut().zip(&direction) {
            *t += gamma * dlt;
        }
        let finished = dropped.is_none() && step.entering.is_empty();
        c_max = if finished {
            0.0
        } else {
            (c_max - gamma * a_eq).max(0.0)
        };
        let gx = gram.times(&theta);
        corr = xty.iter().zip(&gx).map(|(b, g)| b - g).collect();

        let mut entered = Vec::new();
        let mut dropped_index = None;
        just_dropped = None;
        if let Some(pos) = dropped {
            let i = active.remove(pos);
            let sign = signs.remove(pos);
            just_dropped = Some((i, sign));
            in_active[i] = false;
            theta[i] = 0.0;
            dropped_index = Some(i);
            chol = GrowingCholesky::new();
            for p in 0..active.len() {
                push_signed(
                    &mut chol,
                    gram,
                    &active[..p],
                    &signs[..p],
                    active[p],
                    signs[p],
                )?;
            }
            // Recompute correlations against the exact zero.
            let gx = gram.times(&theta);
            corr = xty.iter().zip(&gx).map(|(b, g)| b - g).collect();
        } else {
            for &(j, sign) in &step.entering {
                push_signed(&mut chol, gram, &active, &signs, j, sign)?;
                active.push(j);
                signs.push(sign);
                in_active[j] = true;
                entered.push(j);
            }
        }

        // Response explained by a strict subset: nothing left to fit.
        let exhausted = !finished && c_max <= 1e-13 * c_start;
        if exhausted {
            c_max = 0.0;
        }

        breakpoints.push(LarsState {
            k: breakpoints.len(),
            theta: theta.clone(),
            active: active.clone(),
            signs: signs.clone(),
            residual_corr: corr.clone(),
            max_corr: c_max,
            step: Some(StepInfo {
                equiangular: a_eq,
                w,
                a,
                gamma,
                direction,
                entered,
                dropped: dropped_index,
            }),
        });

        if finished || exhausted {
            break;
        }
    }

    Ok(SolutionPath {
        breakpoints,
        mode,
        terminal_theta: theta,
        separation_flag: false,
    })
}

fn push_signed(
    chol: &mut GrowingCholesky,
    gram: &GramMatrix,
    active: &[usize],
    signs: &[f64],
    j: usize,
    sign: f64,
) -> Result<()> {
    let cross: Vec<f64> = active
        .iter()
        .zip(signs)
        .map(|(&i, &s)| s * sign * gram.get(i, j))
        .collect();
    chol.push(&cross, gram.get(j, j))
}
