mod common;

use common::*;
use tanlars::family::{fisher_metric, log_likelihood, mean_response, potential, score};
use tanlars::mle::solve_theta_tilde;
use tanlars::GlmFamily;

const FAMILIES: [GlmFamily; 3] = [GlmFamily::GAUSSIAN, GlmFamily::BINOMIAL, GlmFamily::POISSON];

#[test]
fn potential_gradient_is_xt_mean() {
    let mut r = rng(10);
    let x = design(&mut r, 40, 4);
    for family in FAMILIES {
        for _ in 0..20 {
            let theta: Vec<f64> = normal_vec(&mut r, 4).iter().map(|v| 0.5 * v).collect();
            let fd = fd_gradient(|t| potential(family, &x, t), &theta, 1e-6);
            let exact = x.transpose_times(&mean_response(family, &x, &theta));
            let scale = exact.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            assert!(max_abs_diff(&fd, &exact) / scale < 1e-5, "{family}");
        }
    }
}

#[test]
fn fisher_metric_is_potential_hessian() {
    let mut r = rng(11);
    let x = design(&mut r, 40, 3);
    for family in FAMILIES {
        for _ in 0..5 {
            let theta = normal_vec(&mut r, 3);
            let g = fisher_metric(family, &x, &theta);
            let h = fd_hessian(|t| potential(family, &x, t), &theta, 1e-3);
            assert!((&g - &h).amax() / g.amax() < 1e-4, "{family}");
        }
    }
}

#[test]
fn gaussian_fisher_metric_is_gram() {
    let mut r = rng(12);
    let x = design(&mut r, 30, 3);
    let g = fisher_metric(GlmFamily::GAUSSIAN, &x, &normal_vec(&mut r, 3));
    assert!((g - x.gram().values()).amax() < 1e-14);
}

#[test]
fn score_is_loglik_gradient() {
    let mut r = rng(13);
    let x = design(&mut r, 50, 3);
    let theta0 = [1.0, -0.5, 0.2];
    let y = binomial_response(&mut r, &x, &theta0);
    let theta = normal_vec(&mut r, 3);
    let fd = fd_gradient(
        |t| log_likelihood(GlmFamily::BINOMIAL, &x, &y, t),
        &theta,
        1e-6,
    );
    assert!(max_abs_diff(&fd, &score(GlmFamily::BINOMIAL, &x, &y, &theta)) < 1e-5);
}

#[test]
fn loglik_is_concave_along_random_lines() {
    let mut r = rng(14);
    let x = design(&mut r, 60, 4);
    let y = poisson_response(&mut r, &x, &[0.5, 0.0, -0.5, 0.2]);
    for _ in 0..20 {
        let a = normal_vec(&mut r, 4);
        let b = normal_vec(&mut r, 4);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
        let l = |t: &[f64]| log_likelihood(GlmFamily::POISSON, &x, &y, t);
        assert!(l(&mid) >= 0.5 * (l(&a) + l(&b)) - 1e-9);
    }
}

#[test]
fn gaussian_loglik_peaks_at_ols() {
    let mut r = rng(15);
    let x = design(&mut r, 30, 2);
    let y = gaussian_response(&mut r, &x, &[2.0, -1.0]);
    let ols = solve_theta_tilde(&x, &y).into_inner();
    let best = log_likelihood(GlmFamily::GAUSSIAN, &x, &y, &ols);
    for i in -10..=10 {
        for j in -10..=10 {
            let theta = [ols[0] + 0.05 * i as f64, ols[1] + 0.05 * j as f64];
            assert!(log_likelihood(GlmFamily::GAUSSIAN, &x, &y, &theta) <= best + 1e-12);
        }
    }
}

#[test]
fn alpha_times_derivative_at_origin_is_one() {
    for family in FAMILIES {
        assert!((family.alpha() * family.inverse_link_derivative(0.0) - 1.0).abs() < 1e-15);
    }
}
