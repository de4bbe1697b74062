mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use tanlars::lars::{lars_path, LarsMode};
use tanlars::selection::{active_set, select, Selector};
use tanlars::tangent::{tlars, tlasso1};
use tanlars::{CriterionKind, DesignMatrix, GlmFamily, MleOptions, ResponseVector};

/// Gaussian log-likelihood (up to constants) of the least-squares fit on `support`.
fn ols_loglik(x: &DesignMatrix, y: &[f64], support: &[usize]) -> f64 {
    let yv = DVector::from_column_slice(y);
    let fitted = if support.is_empty() {
        DVector::zeros(y.len())
    } else {
        let xs = DMatrix::from_fn(x.n(), support.len(), |a, k| x.values()[(a, support[k])]);
        let beta = (xs.transpose() * &xs).try_inverse().unwrap() * xs.transpose() * &yv;
        xs * beta
    };
    yv.dot(&fitted) - 0.5 * fitted.norm_squared()
}

#[test]
fn bic1_recovers_a_strong_true_support() {
    let mut r = rng(800);
    let x = design(&mut r, 200, 5);
    let y = gaussian_response(&mut r, &x, &[5.0, 5.0, 0.0, 0.0, 0.0]);
    let path = tlars(&x, &y, GlmFamily::GAUSSIAN, &MleOptions::default()).unwrap();
    let sel = select(
        &path,
        &x,
        &y,
        GlmFamily::GAUSSIAN,
        CriterionKind::BIC1,
        &MleOptions::default(),
    )
    .unwrap();
    assert_eq!(sel.chosen_support(), vec![0, 1]);

    let n = 200.0f64;
    let values: Vec<f64> = path
        .estimates()
        .map(|theta| {
            let s = active_set(theta);
            -2.0 * ols_loglik(&x, y.values(), &s) + n.ln() * s.len() as f64
        })
        .collect();
    let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let best_support = active_set(
        path.estimates()
            .nth(values.iter().position(|&v| v == best).unwrap())
            .unwrap(),
    );
    assert_eq!(best_support, vec![0, 1]);
    let chosen = sel
        .candidate_indices
        .iter()
        .position(|&k| k == sel.chosen_index)
        .unwrap();
    assert!((sel.criterion_values[chosen] - best).abs() < 1e-8 * (1.0 + best.abs()));
}

/// First seed where AIC1 and AIC2 choose different steps.
fn aic_discrepancy() -> (u64, usize, usize) {
    for seed in 0..500 {
        let mut r = rng(seed);
        let x = design(&mut r, 100, 6);
        let y = binomial_response(&mut r, &x, &[6.0, -4.0, 2.0, 0.0, 0.0, 0.0]);
        let Ok(path) = tlars(&x, &y, GlmFamily::BINOMIAL, &MleOptions::default()) else {
            continue;
        };
        let mut selector = Selector::new(&x, &y, GlmFamily::BINOMIAL, MleOptions::default());
        let a1 = selector
            .select(&path, CriterionKind::AIC1)
            .unwrap()
            .chosen_index;
        let a2 = selector
            .select(&path, CriterionKind::AIC2)
            .unwrap()
            .chosen_index;
        if a1 != a2 {
            return (seed, a1, a2);
        }
    }
    panic!("no discrepancy found");
}

#[test]
fn aic1_and_aic2_can_disagree() {
    let (seed, a1, a2) = aic_discrepancy();
    assert_ne!(a1, a2, "seed {seed}");
}

#[test]
fn bic_never_selects_more_than_aic() {
    for seed in 0..20 {
        let mut r = rng(900 + seed);
        let x = design(&mut r, 120, 6);
        let y = binomial_response(&mut r, &x, &[4.0, -3.0, 1.0, 0.0, 0.0, 0.0]);
        let path = tlasso1(
            &x,
            &y,
            GlmFamily::BINOMIAL,
            &MleOptions {
                ridge: 1e-6,
                ..MleOptions::default()
            },
        )
        .unwrap();
        let mut selector = Selector::new(&x, &y, GlmFamily::BINOMIAL, MleOptions::default());
        for (aic, bic) in [
            (CriterionKind::AIC1, CriterionKind::BIC1),
            (CriterionKind::AIC2, CriterionKind::BIC2),
        ] {
            let a = selector.select(&path, aic).unwrap();
            let b = selector.select(&path, bic).unwrap();
            assert!(b.chosen_support().len() <= a.chosen_support().len());
        }
    }
}

#[test]
fn dropped_variables_leave_the_support() {
    for seed in 0..2000 {
        let mut r = rng(seed);
        let z = raw_matrix(&mut r, 30, 3);
        let common = normal_vec(&mut r, 30);
        let raw = DMatrix::from_fn(30, 3, |a, j| {
            z[(a, j)] + 3.0 * common[a] * if j == 1 { -1.0 } else { 1.0 }
        });
        let x = DesignMatrix::normalize(&raw, None).unwrap();
        let y = normal_vec(&mut r, 30);
        let path = lars_path(&x, &y, LarsMode::Lasso).unwrap();
        for b in &path.breakpoints {
            if let Some(j) = b.step.as_ref().and_then(|s| s.dropped) {
                assert!(!active_set(&b.theta).contains(&j));
                let yv = ResponseVector::new(y.clone(), tanlars::FamilyDomain::Real).unwrap();
                let sel = select(
                    &path,
                    &x,
                    &yv,
                    GlmFamily::GAUSSIAN,
                    CriterionKind::AIC2,
                    &MleOptions::default(),
                )
                .unwrap();
                assert_eq!(sel.candidate_indices.len(), sel.criterion_values.len());
                return;
            }
        }
    }
    panic!("no lasso drop found");
}
