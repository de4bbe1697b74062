mod common;

use common::*;
use nalgebra::DMatrix;
use tanlars::export::{path_export, read_path_export, read_path_metadata, PathKind};
use tanlars::lars::{lars_path, LarsMode};
use tanlars::{DesignMatrix, Method};

#[test]
fn drop_row_has_smaller_active_size() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5000 {
        let mut r = rng(seed);
        let z = raw_matrix(&mut r, 30, 3);
        let common = normal_vec(&mut r, 30);
        let load = normal_vec(&mut r, 3);
        let raw = DMatrix::from_fn(30, 3, |a, j| z[(a, j)] + 3.0 * load[j] * common[a]);
        let x = DesignMatrix::normalize(&raw, None).unwrap();
        let y = normal_vec(&mut r, 30);
        let path = lars_path(&x, &y, LarsMode::Lasso).unwrap();
        let Some(k) = path
            .breakpoints
            .iter()
            .position(|b| b.step.as_ref().is_some_and(|s| s.dropped.is_some()))
        else {
            continue;
        };
        let out = dir.path().join("lasso.csv");
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        path_export(&path, Some(Method::Tlasso1), None, Some(&names), &out).unwrap();
        let back = read_path_export(&out).unwrap();
        assert_eq!(back.column_names, names);
        assert!(back.active_sizes[k] < back.active_sizes[k - 1]);
        for (b, theta) in path.breakpoints.iter().zip(&back.coefficients) {
            assert_eq!(&b.theta, theta);
        }
        for (l, b) in back.lambdas.iter().zip(&path.breakpoints) {
            assert_eq!(*l, b.lambda());
        }
        let meta = read_path_metadata(&out).unwrap();
        assert_eq!(meta.kind, PathKind::Lasso);
        assert_eq!(meta.steps, path.len());
        return;
    }
    panic!("no drop witness found");
}

#[test]
fn mismatched_column_names_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(1);
    let x = design(&mut r, 10, 2);
    let path = lars_path(&x, &normal_vec(&mut r, 10), LarsMode::Lar).unwrap();
    let names = vec!["only".to_owned()];
    assert!(path_export(&path, None, None, Some(&names), &dir.path().join("p.csv")).is_err());
}
