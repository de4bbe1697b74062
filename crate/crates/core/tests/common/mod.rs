//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Poisson, StandardNormal};

use tanlars::{DesignMatrix, FamilyDomain, ResponseVector};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn raw_matrix(rng: &mut ChaCha20Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

pub fn design(rng: &mut ChaCha20Rng, n: usize, d: usize) -> DesignMatrix {
    DesignMatrix::normalize(&raw_matrix(rng, n, d), None).expect("random design has full rank")
}

pub fn gaussian_response(rng: &mut ChaCha20Rng, x: &DesignMatrix, theta: &[f64]) -> ResponseVector {
    let eta = x.times(theta);
    let y = eta
        .iter()
        .map(|m| m + rng.sample::<f64, _>(StandardNormal))
        .collect();
    ResponseVector::new(y, FamilyDomain::Real).unwrap()
}

pub fn binomial_response(rng: &mut ChaCha20Rng, x: &DesignMatrix, theta: &[f64]) -> ResponseVector {
    let y = x
        .times(theta)
        .iter()
        .map(|&t| {
            let p = 1.0 / (1.0 + (-t).exp());
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    ResponseVector::new(y, FamilyDomain::Binary01).unwrap()
}

pub fn poisson_response(rng: &mut ChaCha20Rng, x: &DesignMatrix, theta: &[f64]) -> ResponseVector {
    let y = x
        .times(theta)
        .iter()
        .map(|&t| rng.sample(Poisson::new(t.exp()).unwrap()))
        .collect();
    ResponseVector::new(y, FamilyDomain::NonnegInteger).unwrap()
}

/// Two centered unit columns at 60° built by Gram–Schmidt.
pub fn sixty_degree_raw(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
    let center = |v: &mut Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let unit = |v: &mut Vec<f64>| {
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= s);
    };
    let mut u1 = normal_vec(rng, n);
    center(&mut u1);
    unit(&mut u1);
    let mut u2 = normal_vec(rng, n);
    center(&mut u2);
    let proj: f64 = u1.iter().zip(&u2).map(|(a, b)| a * b).sum();
    u2.iter_mut().zip(&u1).for_each(|(b, a)| *b -= proj * a);
    unit(&mut u2);
    let c = 0.5;
    let s = (0.75f64).sqrt();
    DMatrix::from_fn(
        n,
        2,
        |a, j| if j == 0 { u1[a] } else { c * u1[a] + s * u2[a] },
    )
}

/// Textbook LARS (Efron et al.) driven by an explicit residual and fitted
/// mean vector, with explicit inverses. Returns the coefficient vector at
/// every breakpoint, starting from zero. A dropped variable may not re-enter
/// with its old sign on the very next step.
pub fn efron_lars(x: &DMatrix<f64>, y: &[f64], lasso: bool) -> Vec<Vec<f64>> {
    let (n, d) = x.shape();
    let y = DVector::from_column_slice(y);
    let mut mu = DVector::zeros(n);
    let mut beta = vec![0.0; d];
    let mut active: Vec<usize> = Vec::new();
    let mut path = vec![beta.clone()];
    let mut banned: Option<(usize, f64)> = None;

    let c0 = (x.transpose() * &y).amax();
    if c0 == 0.0 {
        return path;
    }
    for _ in 0..(8 * d + 8) {
        let c = x.transpose() * (&y - &mu);
        let big_c = c.amax();
        if big_c <= 1e-13 * c0 {
            break;
        }
        if active.is_empty() {
            active.push(c.iamax());
        }
        let s: Vec<f64> = active.iter().map(|&j| c[j].signum()).collect();
        let k = active.len();
        let xa = DMatrix::from_fn(n, k, |a, i| s[i] * x[(a, active[i])]);
        let ga = xa.transpose() * &xa;
        let gi = ga.try_inverse().expect("active Gram invertible");
        let ones = DVector::from_element(k, 1.0);
        let big_a = 1.0 / (ones.dot(&(&gi * &ones))).sqrt();
        let w = &gi * &ones * big_a;
        let u = &xa * &w;
        let a = x.transpose() * &u;

        let mut gamma = big_c / big_a;
        let mut entering = None;
        for j in 0..d {
            if active.contains(&j) {
                continue;
            }
            for (cand, sign) in [
                ((big_c - c[j]) / (big_a - a[j]), 1.0),
                ((big_c + c[j]) / (big_a + a[j]), -1.0),
            ] {
                if banned == Some((j, sign)) {
                    continue;
                }
                if cand > 1e-14 && cand < gamma {
                    gamma = cand;
                    entering = Some(j);
                }
            }
        }
        banned = None;
        let mut drop = None;
        if lasso {
            for (i, &j) in active.iter().enumerate() {
                let dj = s[i] * w[i];
                let g = -beta[j] / dj;
                if g > 1e-14 && g < gamma {
                    gamma = g;
                    drop = Some(i);
                }
            }
        }
        mu += &u * gamma;
        for (i, &j) in active.iter().enumerate() {
            beta[j] += gamma * s[i] * w[i];
        }
        match (drop, entering) {
            (Some(i), _) => {
                let j = active.remove(i);
                beta[j] = 0.0;
                banned = Some((j, s[i]));
            }
            (None, Some(j)) => active.push(j),
            (None, None) => {
                path.push(beta.clone());
                break;
            }
        }
        path.push(beta.clone());
    }
    path
}

/// Cyclic coordinate descent for `‖r − Xθ‖² + λ‖θ‖₁`, iterated until the
/// duality gap is below `gap_tol` (relative to `max(1, primal)`) and a full
/// sweep moves no coordinate by more than 1e-13. At `λ = 0` the gap test is
/// replaced by `‖Xᵀ(r − Xθ)‖∞ ≤ 1e-12`.
pub fn cd_lasso(x: &DMatrix<f64>, r: &[f64], lambda: f64, gap_tol: f64) -> Vec<f64> {
    let d = x.ncols();
    let r = DVector::from_column_slice(r);
    let col_sq: Vec<f64> = (0..d).map(|j| x.column(j).norm_squared()).collect();
    let mut theta = vec![0.0; d];
    let mut resid = r.clone();
    for sweep in 0..1_000_000 {
        let mut max_delta = 0.0_f64;
        for j in 0..d {
            let xj = x.column(j);
            let rho = xj.dot(&resid) + col_sq[j] * theta[j];
            let z = 2.0 * rho;
            let next = if z > lambda {
                (z - lambda) / (2.0 * col_sq[j])
            } else if z < -lambda {
                (z + lambda) / (2.0 * col_sq[j])
            } else {
                0.0
            };
            let delta = next - theta[j];
            if delta != 0.0 {
                resid.axpy(-delta, &xj, 1.0);
                theta[j] = next;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if sweep % 10 == 0 || max_delta < 1e-13 {
            // Residual recomputed from scratch to avoid drift.
            let t = DVector::from_column_slice(&theta);
            resid = &r - x * &t;
            let primal = resid.norm_squared() + lambda * theta.iter().map(|v| v.abs()).sum::<f64>();
            let u = &resid * 2.0;
            let dual_norm = (x.transpose() * &u).amax();
            if lambda == 0.0 {
                // Least squares: no feasible dual scaling, check stationarity.
                if dual_norm <= 1e-12 * r.norm().max(1.0) && max_delta < 1e-13 {
                    return theta;
                }
                continue;
            }
            let scale = if dual_norm > lambda {
                lambda / dual_norm
            } else {
                1.0
            };
            let u = u * scale;
            let dual = -u.norm_squared() / 4.0 + u.dot(&r);
            if primal - dual <= gap_tol * primal.max(1.0) && max_delta < 1e-13 {
                return theta;
            }
        }
    }
    panic!("coordinate descent did not reach the duality gap");
}

/// Damped Newton for the canonical-link log-likelihood with dense inverses
/// and Armijo backtracking.
pub fn newton_oracle(
    x: &DMatrix<f64>,
    y: &[f64],
    mean: impl Fn(f64) -> f64,
    var: impl Fn(f64) -> f64,
    cumulant: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let (n, d) = x.shape();
    let y = DVector::from_column_slice(y);
    let loglik = |b: &DVector<f64>| -> f64 {
        let eta = x * b;
        (0..n).map(|a| y[a] * eta[a] - cumulant(eta[a])).sum()
    };
    let mut beta = DVector::zeros(d);
    for _ in 0..200 {
        let eta = x * &beta;
        let mu = eta.map(&mean);
        let w = eta.map(&var);
        let g = x.transpose() * (&y - mu);
        if g.amax() < 1e-12 {
            break;
        }
        let mut h = DMatrix::zeros(d, d);
        for a in 0..n {
            let row = x.row(a);
            h += row.transpose() * row * w[a];
        }
        let step = h.try_inverse().expect("Hessian invertible") * &g;
        let base = loglik(&beta);
        let mut t = 1.0;
        let slack = 1e-13 * (1.0 + base.abs());
        while loglik(&(&beta + &step * t)) < base + 1e-4 * t * g.dot(&step) - slack && t > 1e-12 {
            t *= 0.5;
        }
        beta += step * t;
    }
    beta.as_slice().to_vec()
}

pub fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|i| {
            let mut p = at.to_vec();
            let mut m = at.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Second central differences of `f`.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> DMatrix<f64> {
    let d = at.len();
    let eval = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut p = at.to_vec();
        p[di] += si * h;
        p[dj] += sj * h;
        f(&p)
    };
    DMatrix::from_fn(d, d, |i, j| {
        (eval(i, 1.0, j, 1.0) - eval(i, 1.0, j, -1.0) - eval(i, -1.0, j, 1.0)
            + eval(i, -1.0, j, -1.0))
            / (4.0 * h * h)
    })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
