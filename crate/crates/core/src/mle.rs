//! Full-model maximum likelihood, the least-squares surrogate `θ̃` and the
//! quadratic expansion of the log-likelihood around the origin.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrix, ResponseVector};
use crate::error::{Error, Result};
use crate::family::{weighted_gram, FamilyKind, GlmFamily};
use crate::linalg::{dot, max_abs, spd_solve};

/// `‖θ‖∞` beyond which the unpenalized Newton iteration is declared divergent.
pub const SEPARATION_THRESHOLD: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Convergence threshold on `‖∇‖∞` of the objective being maximized.
    pub grad_tol: f64,
    /// Ridge weight used only when the unpenalized fit diverges; 0 turns
    /// divergence into [`Error::Separation`].
    pub ridge: f64,
    /// Fit an unpenalized intercept alongside `θ`.
    pub intercept: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-8,
            ridge: 0.0,
            intercept: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub theta_hat: Vec<f64>,
    /// Zero unless [`MleOptions::intercept`] is set.
    pub intercept: f64,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
    /// The unpenalized fit diverged and `theta_hat` is ridge-stabilized.
    pub separation_flag: bool,
    pub ridge_used: f64,
}

/// Solution of the normal equations `XᵀX θ̃ = Xᵀy`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTilde(Vec<f64>);

impl ThetaTilde {
    pub fn value(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn solve_theta_tilde(x: &DesignMatrix, y: &ResponseVector) -> ThetaTilde {
    assert_eq!(x.n(), y.len(), "response length must equal n");
    let xty = DVector::from_vec(x.transpose_times(y.values()));
    // XᵀX is positive definite for any DesignMatrix.
    let theta =
        spd_solve(x.gram().values(), &xty).expect("design Gram matrix is positive definite");
    ThetaTilde(theta.as_slice().to_vec())
}

/// Quadratic model of the log-likelihood at the origin:
/// `−(1/2α)(θ−αθ̃)ᵀXᵀX(θ−αθ̃) + (α/2)θ̃ᵀXᵀXθ̃ − ψ(0)`.
///
/// Exact for the gaussian family; for the others the error is the Taylor
/// remainder of `ψ` beyond second order.
pub fn quadratic_loglik(
    x: &DesignMatrix,
    family: GlmFamily,
    theta_tilde: &ThetaTilde,
    theta: &[f64],
) -> f64 {
    let alpha = family.alpha();
    let tt = theta_tilde.value();
    assert_eq!(theta.len(), tt.len());
    let g = x.gram();
    let diff: Vec<f64> = theta.iter().zip(tt).map(|(t, s)| t - alpha * s).collect();
    let quad = dot(&diff, &g.times(&diff));
    let constant = dot(tt, &g.times(tt));
    let psi0 = x.n() as f64 * family.cumulant(0.0);
    -quad / (2.0 * alpha) + 0.5 * alpha * constant - psi0
}

/// Maximum likelihood for the full model by damped Newton (IRLS).
///
/// The gaussian family is solved in closed form (`θ̂ = θ̃`). For the others,
/// a Newton step is accepted only if the (possibly penalized) log-likelihood
/// does not decrease, halving the step otherwise. If `‖θ‖∞` exceeds
/// [`SEPARATION_THRESHOLD`] the fit is restarted with the penalty
/// `ridge·‖θ‖²` when `opts.ridge > 0`, or fails with [`Error::Separation`].
pub fn fit_mle(
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    opts: &MleOptions,
) -> Result<MleResult> {
    if x.n() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows in design, {} responses",
            x.n(),
            y.len()
        )));
    }
    family.check_response(y)?;

    if family.kind() == FamilyKind::Gaussian {
        let theta = solve_theta_tilde(x, y).into_inner();
        let eta = x.times(&theta);
        let intercept = if opts.intercept {
            family.profile_intercept(y.values(), &eta)
        } else {
            0.0
        };
        let resid: Vec<f64> = y
            .values()
            .iter()
            .zip(&eta)
            .map(|(a, t)| a - t - intercept)
            .collect();
        let mut grad = x.transpose_times(&resid);
        if opts.intercept {
            grad.push(resid.iter().sum());
        }
        return Ok(MleResult {
            theta_hat: theta,
            intercept,
            iterations: 0,
            final_gradient_norm: max_abs(&grad),
            converged: true,
            separation_flag: false,
            ridge_used: 0.0,
        });
    }

    match newton(x, y, family, opts, 0.0) {
        Err(Error::Separation { .. }) if opts.ridge > 0.0 => {
            let mut res = newton(x, y, family, opts, opts.ridge)?;
            res.separation_flag = true;
            Ok(res)
        }
        other => other,
    }
}

/// Model matrix with an optional leading column of ones.
struct Working<'a> {
    x: &'a DesignMatrix,
    intercept: bool,
}

impl Working<'_> {
    fn dim(&self) -> usize {
        self.x.d() + usize::from(self.intercept)
    }

    fn split<'b>(&self, beta: &'b [f64]) -> (f64, &'b [f64]) {
        if self.intercept {
            (beta[0], &beta[1..])
        } else {
            (0.0, beta)
        }
    }

    fn eta(&self, beta: &[f64]) -> Vec<f64> {
        let (b, theta) = self.split(beta);
        self.x.times(theta).into_iter().map(|t| t + b).collect()
    }

    fn transpose_times(&self, v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        if self.intercept {
            out.push(v.iter().sum());
        }
        out.extend(self.x.transpose_times(v));
        out
    }

    fn weighted_gram(&self, w: &[f64]) -> DMatrix<f64> {
        let xw = weighted_gram(self.x.values(), w);
        if !self.intercept {
            return xw;
        }
        let d = self.x.d();
        let col = self.x.transpose_times(w);
        let mut h = DMatrix::zeros(d + 1, d + 1);
        h[(0, 0)] = w.iter().sum();
        for j in 0..d {
            h[(0, j + 1)] = col[j];
            h[(j + 1, 0)] = col[j];
            for k in 0..d {
                h[(j + 1, k + 1)] = xw[(j, k)];
            }
        }
        h
    }
}

fn newton(
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    opts: &MleOptions,
    ridge: f64,
) -> Result<MleResult> {
    let work = Working {
        x,
        intercept: opts.intercept,
    };
    let p = work.dim();
    let offset = usize::from(opts.intercept);
    let yv = y.values();

    let objective = |beta: &[f64]| -> f64 {
        let (_, theta) = work.split(beta);
        family.loglik_from_eta(yv, &work.eta(beta)) - ridge * dot(theta, theta)
    };
    let gradient = |beta: &[f64], eta: &[f64]| -> Vec<f64> {
        let resid: Vec<f64> = yv
            .iter()
            .zip(eta)
            .map(|(&a, &t)| a - family.inverse_link(t))
            .collect();
        let mut g = work.transpose_times(&resid);
        for j in offset..p {
            g[j] -= 2.0 * ridge * beta[j];
        }
        g
    };

    let mut beta = vec![0.0; p];
    if opts.intercept {
        beta[0] = family.profile_intercept(yv, &vec![0.0; x.n()]);
    }
    let mut eta = work.eta(&beta);
    let mut value = objective(&beta);
    let mut grad = gradient(&beta, &eta);
    let mut gnorm = max_abs(&grad);

    for iter in 0..opts.max_iter {
        if gnorm < opts.grad_tol {
            return Ok(finish(&work, beta, iter, gnorm, ridge));
        }
        let weights: Vec<f64> = eta
            .iter()
            .map(|&t| family.inverse_link_derivative(t))
            .collect();
        let mut h = work.weighted_gram(&weights);
        for j in offset..p {
            h[(j, j)] += 2.0 * ridge;
        }
        let step = newton_direction(h, &grad)?;

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let trial_value = objective(&trial);
            if trial_value.is_finite() && trial_value >= value - 1e-12 * (1.0 + value.abs()) {
                beta = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let large_step = max_abs(&step) > 1e-3 * (1.0 + max_abs(&beta));
        if accepted && t == 1.0 && ridge == 0.0 && large_step {
            // On separated data the likelihood keeps increasing along the
            // Newton ray; extend the step so divergence is detected quickly.
            let base = beta.clone();
            let mut factor = 2.0;
            while factor <= 1024.0 {
                let trial: Vec<f64> = base
                    .iter()
                    .zip(&step)
                    .map(|(b, s)| b + (factor - 1.0) * s)
                    .collect();
                let trial_value = objective(&trial);
                if !(trial_value > value) {
                    break;
                }
                beta = trial;
                value = trial_value;
                factor *= 2.0;
            }
        }
        eta = work.eta(&beta);
        grad = gradient(&beta, &eta);
        gnorm = max_abs(&grad);

        if ridge == 0.0 && max_abs(&beta[offset..]) > SEPARATION_THRESHOLD {
            return Err(Error::Separation {
                iterations: iter + 1,
                threshold: SEPARATION_THRESHOLD,
            });
        }
        if !accepted {
            // No ascent possible along the Newton direction: numerically at
            // the optimum, or stuck.
            if gnorm < opts.grad_tol {
                return Ok(finish(&work, beta, iter + 1, gnorm, ridge));
            }
            return Err(Error::NotConverged {
                iterations: iter + 1,
                gradient_norm: gnorm,
            });
        }
    }
    if gnorm < opts.grad_tol {
        return Ok(finish(&work, beta, opts.max_iter, gnorm, ridge));
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        gradient_norm: gnorm,
    })
}

fn newton_direction(mut h: DMatrix<f64>, grad: &[f64]) -> Result<Vec<f64>> {
    let g = DVector::from_column_slice(grad);
    let p = h.nrows();
    // Weights can underflow on diverging fits; fall back to a small
    // Levenberg shift rather than giving up.
    let scale = (0..p)
        .map(|j| h[(j, j)])
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let mut shift = 0.0;
    for _ in 0..8 {
        if let Some(chol) = Cholesky::new(h.clone()) {
            return Ok(chol.solve(&g).as_slice().to_vec());
        }
        let next = if shift == 0.0 {
            1e-12 * scale
        } else {
            shift * 100.0
        };
        for j in 0..p {
            h[(j, j)] += next - shift;
        }
        shift = next;
    }
    Err(Error::NumericalBreakdown(
        "Newton system is not positive definite".into(),
    ))
}

fn finish(
    work: &Working<'_>,
    beta: Vec<f64>,
    iterations: usize,
    gnorm: f64,
    ridge: f64,
) -> MleResult {
    let (b, theta) = work.split(&beta);
    MleResult {
        theta_hat: theta.to_vec(),
        intercept: b,
        iterations,
        final_gradient_norm: gnorm,
        converged: true,
        separation_flag: false,
        ridge_used: ridge,
    }
}
