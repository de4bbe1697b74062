//! ℓ1-penalized maximum likelihood over a λ grid:
//! `min −yᵀXθ + ψ(θ) + λ‖θ‖₁`.
//!
//! Each grid point is solved by repeatedly replacing the log-likelihood with
//! its second-order expansion at the current iterate and minimizing the
//! penalized quadratic by cyclic coordinate descent with soft-thresholding.
//! A backtracking step keeps the true objective from increasing between
//! outer iterations. Solutions are warm-started down the grid.

use serde::{Deserialize, Serialize};

use crate::data::{DesignMatrix, ResponseVector};
use crate::error::{Error, Result};
use crate::family::{weighted_gram, GlmFamily};
use crate::linalg::max_abs;

/// KKT residual accepted as converged.
pub const KKT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Options {
    pub nlambda: usize,
    pub lambda_ratio: f64,
    /// Fit an unpenalized intercept.
    pub intercept: bool,
    /// Outer tolerance on the largest coefficient change.
    pub outer_tol: f64,
    /// Coordinate-descent tolerance on the largest coefficient change.
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_sweeps: usize,
}

impl Default for L1Options {
    fn default() -> Self {
        Self {
            nlambda: 100,
            lambda_ratio: 1e-4,
            intercept: false,
            outer_tol: 1e-8,
            inner_tol: 1e-10,
            max_outer: 100,
            max_sweeps: 100_000,
        }
    }
}

/// Log-spaced decreasing penalties from `lambda_max` to `lambda_max·ratio`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub values: Vec<f64>,
    pub lambda_max: f64,
    pub ratio: f64,
    pub count: usize,
}

impl LambdaGrid {
    pub fn new(lambda_max: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(lambda_max > 0.0 && lambda_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "lambda_max must be positive, got {lambda_max}"
            )));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidInput(format!(
                "lambda ratio must lie in (0, 1), got {ratio}"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidInput(
                "lambda grid needs at least one point".into(),
            ));
        }
        let values = if count == 1 {
            vec![lambda_max]
        } else {
            let step = ratio.ln() / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        lambda_max * ratio
                    } else {
                        lambda_max * (step * i as f64).exp()
                    }
                })
                .collect()
        };
        Ok(Self {
            values,
            lambda_max,
            ratio,
            count,
        })
    }

    /// Grid starting at the smallest λ for which `θ = 0` is optimal.
    pub fn for_data(
        x: &DesignMatrix,
        y: &ResponseVector,
        family: GlmFamily,
        opts: &L1Options,
    ) -> Result<Self> {
        Self::new(
            lambda_max(x, y, family, opts.intercept),
            opts.lambda_ratio,
            opts.nlambda,
        )
    }
}

/// `max_j |xⱼᵀ(y − μ(0))|`, with `μ(0)` taken at the profiled intercept when
/// one is fitted.
pub fn lambda_max(x: &DesignMatrix, y: &ResponseVector, family: GlmFamily, intercept: bool) -> f64 {
    let zero = vec![0.0; x.n()];
    let b = if intercept {
        family.profile_intercept(y.values(), &zero)
    } else {
        0.0
    };
    let resid: Vec<f64> = y
        .values()
        .iter()
        .map(|&a| a - family.inverse_link(b))
        .collect();
    max_abs(&x.transpose_times(&resid))
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Path {
    pub lambdas: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    /// Zero unless an intercept is fitted.
    pub intercepts: Vec<f64>,
    pub kkt_residuals: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

impl L1Path {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn estimates(&self) -> impl Iterator<Item = &[f64]> {
        self.coefficients.iter().map(Vec::as_slice)
    }

    /// Grid indices whose solve did not meet the KKT tolerance.
    pub fn not_converged(&self) -> Vec<usize> {
        self.converged
            .iter()
            .enumerate()
            .filter(|(_, c)| !**c)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Largest violation of the optimality conditions of the penalized
/// likelihood at `θ`: for `θⱼ ≠ 0`, `|gⱼ − λ sign θⱼ|`; otherwise
/// `max(|gⱼ| − λ, 0)`, with `g = Xᵀ(y − μ(θ))`.
pub fn kkt_residual(
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    theta: &[f64],
    lambda: f64,
) -> f64 {
    kkt_residual_with_intercept(x, y, family, theta, 0.0, lambda)
}

pub fn kkt_residual_with_intercept(
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    theta: &[f64],
    intercept: f64,
    lambda: f64,
) -> f64 {
    let eta = x.times(theta);
    let resid: Vec<f64> = y
        .values()
        .iter()
        .zip(&eta)
        .map(|(&a, &t)| a - family.inverse_link(t + intercept))
        .collect();
    let g = x.transpose_times(&resid);
    g.iter()
        .zip(theta)
        .map(|(&gj, &tj)| {
            if tj != 0.0 {
                (gj - lambda * tj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Solves the penalized likelihood at every grid point, warm-starting each
/// solve from the previous solution. Non-converged points are flagged and
/// the computation continues.
pub fn l1_glm_path(
    x: &DesignMatrix,
    y: &ResponseVector,
    family: GlmFamily,
    grid: &LambdaGrid,
    opts: &L1Options,
) -> Result<L1Path> {
    if x.n() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows in design, {} responses",
            x.n(),
            y.len()
        )));
    }
    family.check_response(y)?;

    let solver = Solver::new(x, y, family, opts);
    let mut beta = vec![0.0; solver.p];
    if opts.intercept {
        beta[0] = family.profile_intercept(y.values(), &vec![0.0; x.n()]);
    }

    let mut path = L1Path {
        lambdas: Vec::with_capacity(grid.values.len()),
        coefficients: Vec::with_capacity(grid.values.len()),
        intercepts: Vec::with_capacity(grid.values.len()),
        kkt_residuals: Vec::with_capacity(grid.values.len()),
        converged: Vec::with_capacity(grid.values.len()),
        iterations: Vec::with_capacity(grid.values.len()),
    };
    for &lambda in &grid.values {
        let (next, iterations, outer_converged) = solver.solve(&beta, lambda);
        beta = next;
        let (b, theta) = solver.split(&beta);
        let kkt = kkt_residual_with_intercept(x, y, family, theta, b, lambda);
        path.lambdas.push(lambda);
        path.coefficients.push(theta.to_vec());
        path.intercepts.push(b);
        path.kkt_residuals.push(kkt);
        path.converged.push(outer_converged && kkt <= KKT_TOLERANCE);
        path.iterations.push(iterations);
    }
    Ok(path)
}

struct Solver<'a> {
    x: &'a DesignMatrix,
    y: &'a ResponseVector,
    family: GlmFamily,
    opts: &'a L1Options,
    p: usize,
    offset: usize,
}

impl<'a> Solver<'a> {
    fn new(
        x: &'a DesignMatrix,
        y: &'a ResponseVector,
        family: GlmFamily,
        opts: &'a L1Options,
    ) -> Self {
        let offset = usize::from(opts.intercept);
        Self {
            x,
            y,
            family,
            opts,
            p: x.d() + offset,
            offset,
        }
    }

    fn split<'b>(&self, beta: &'b [f64]) -> (f64, &'b [f64]) {
        if self.opts.intercept {
            (beta[0], &beta[1..])
        } else {
            (0.0, beta)
        }
    }

    fn eta(&self, beta: &[f64]) -> Vec<f64> {
        let (b, theta) = self.split(beta);
        self.x.times(theta).into_iter().map(|t| t + b).collect()
    }

    fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        let (_, theta) = self.split(beta);
        let l1: f64 = theta.iter().map(|t| t.abs()).sum();
        -self
            .family
            .loglik_from_eta(self.y.values(), &self.eta(beta))
            + lambda * l1
    }

    /// Gradient of the log-likelihood and the Fisher information at `beta`.
    fn expansion(&self, beta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let eta = self.eta(beta);
        let resid: Vec<f64> = self
            .y
            .values()
            .iter()
            .zip(&eta)
            .map(|(&a, &t)| a - self.family.inverse_link(t))
            .collect();
        let w: Vec<f64> = eta
            .iter()
            .map(|&t| self.family.inverse_link_derivative(t))
            .collect();
        let xw = weighted_gram(self.x.values(), &w);
        let d = self.x.d();
        let mut grad = Vec::with_capacity(self.p);
        let mut h = vec![vec![0.0; self.p]; self.p];
        if self.opts.intercept {
            grad.push(resid.iter().sum());
            let col = self.x.transpose_times(&w);
            h[0][0] = w.iter().sum();
            for j in 0..d {
                h[0][j + 1] = col[j];
                h[j + 1][0] = col[j];
            }
        }
        grad.extend(self.x.transpose_times(&resid));
        for j in 0..d {
            for k in 0..d {
                h[j + self.offset][k + self.offset] = xw[(j, k)];
            }
        }
        (grad, h)
    }

    /// Minimizes `−gᵀΔ + ½ΔᵀHΔ + λ‖θ‖₁` (`Δ = β − centre`) by coordinate
    /// descent.
    fn coordinate_descent(
        &self,
        centre: &[f64],
        grad: &[f64],
        h: &[Vec<f64>],
        lambda: f64,
    ) -> Vec<f64> {
        let mut beta = centre.to_vec();
        let mut h_delta = vec![0.0; self.p];
        for _ in 0..self.opts.max_sweeps {
            let mut max_change = 0.0_f64;
            for j in 0..self.p {
                let hjj = h[j][j];
                if !(hjj > 0.0) {
                    continue;
                }
                let partial = -grad[j] + h_delta[j];
                let z = hjj * beta[j] - partial;
                let penalty = if j < self.offset { 0.0 } else { lambda };
                let next = soft_threshold(z, penalty) / hjj;
                let change = next - beta[j];
                if change != 0.0 {
                    for (hd, row) in h_delta.iter_mut().zip(h) {
                        *hd += change * row[j];
                    }
                    beta[j] = next;
                    max_change = max_change.max(change.abs());
                }
            }
            if max_change < self.opts.inner_tol {
                break;
            }
        }
        beta
    }

    fn solve(&self, start: &[f64], lambda: f64) -> (Vec<f64>, usize, bool) {
        let mut beta = start.to_vec();
        let mut value = self.objective(&beta, lambda);
        for iter in 0..self.opts.max_outer {
            let (grad, h) = self.expansion(&beta);
            let proposal = self.coordinate_descent(&beta, &grad, &h, lambda);

            let mut t = 1.0;
            let mut next = proposal.clone();
            let mut next_value = self.objective(&next, lambda);
            let slack = 1e-12 * (1.0 + value.abs());
            while !(next_value <= value + slack) && t > 1e-10 {
                t *= 0.5;
                next = beta
                    .iter()
                    .zip(&proposal)
                    .map(|(b, p)| b + t * (p - b))
                    .collect();
                next_value = self.objective(&next, lambda);
            }
            if !(next_value <= value + slack) {
                return (beta, iter + 1, false);
            }
            debug_assert!(next_value <= value + slack, "objective increased");

            let change = beta
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            beta = next;
            value = next_value;
            if change < self.opts.outer_tol {
                return (beta, iter + 1, true);
            }
        }
        (beta, self.opts.max_outer, false)
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FamilyDomain;
    use nalgebra::DMatrix;

    fn dataset() -> (DesignMatrix, ResponseVector) {
        let raw = DMatrix::from_row_slice(
            8,
            3,
            &[
                0.3, 1.2, -0.5, -1.1, 0.4, 0.9, 0.8, -0.7, 0.1, 1.5, 0.2, -1.2, -0.4, -1.3, 0.6,
                0.2, 0.9, 1.4, -0.9, -0.1, -0.8, -0.4, 0.5, 0.3,
            ],
        );
        let x = DesignMatrix::normalize(&raw, None).unwrap();
        let y = ResponseVector::new(
            vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0],
            FamilyDomain::Binary01,
        )
        .unwrap();
        (x, y)
    }

    #[test]
    fn grid_is_log_spaced_and_decreasing() {
        let grid = LambdaGrid::new(2.0, 1e-2, 5).unwrap();
        assert_eq!(grid.values[0], 2.0);
        assert!((grid.values[4] - 0.02).abs() < 1e-16);
        for w in grid.values.windows(2) {
            assert!(w[1] < w[0]);
            assert!((w[1] / w[0] - 10f64.powf(-0.5)).abs() < 1e-12);
        }
        assert!(LambdaGrid::new(0.0, 0.1, 3).is_err());
        assert!(LambdaGrid::new(1.0, 1.5, 3).is_err());
    }

    #[test]
    fn kkt_at_origin() {
        let (x, y) = dataset();
        let f = GlmFamily::BINOMIAL;
        let lmax = lambda_max(&x, &y, f, false);
        let zero = [0.0; 3];
        assert!(kkt_residual(&x, &y, f, &zero, lmax) < 1e-12);
        assert!((kkt_residual(&x, &y, f, &zero, lmax / 2.0) - lmax / 2.0).abs() < 1e-12);
    }

    #[test]
    fn path_starts_at_zero_and_converges() {
        let (x, y) = dataset();
        let f = GlmFamily::BINOMIAL;
        let opts = L1Options {
            nlambda: 20,
            lambda_ratio: 1e-2,
            ..L1Options::default()
        };
        let grid = LambdaGrid::for_data(&x, &y, f, &opts).unwrap();
        let path = l1_glm_path(&x, &y, f, &grid, &opts).unwrap();
        assert!(path.coefficients[0].iter().all(|&t| t == 0.0));
        assert!(path.not_converged().is_empty(), "{:?}", path.kkt_residuals);
        for (theta, &lambda) in path.coefficients.iter().zip(&path.lambdas) {
            assert!(kkt_residual(&x, &y, f, theta, lambda) < KKT_TOLERANCE);
        }
    }

    #[test]
    fn intercept_is_unpenalized() {
        let (x, _) = dataset();
        let y = ResponseVector::new(
            vec![1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            FamilyDomain::Binary01,
        )
        .unwrap();
        let f = GlmFamily::BINOMIAL;
        let opts = L1Options {
            nlambda: 5,
            lambda_ratio: 0.1,
            intercept: true,
            ..L1Options::default()
        };
        let grid = LambdaGrid::for_data(&x, &y, f, &opts).unwrap();
        let path = l1_glm_path(&x, &y, f, &grid, &opts).unwrap();
        // At λ_max only the intercept is non-zero: logit(6/8).
        assert!((path.intercepts[0] - (6.0f64 / 2.0).ln()).abs() < 1e-8);
        assert!(path.coefficients[0].iter().all(|&t| t == 0.0));
        assert!(path.not_converged().is_empty());
    }

    #[test]
    fn soft_threshold_shrinks_toward_zero() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }
}
