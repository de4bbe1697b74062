use std::path::Path;
use std::process::{Command, Output};

fn tanlars(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_tanlars"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "tanlars {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.json");
    let four = dir.path().join("four.json");
    for (out, workers) in [(&one, "1"), (&four, "4")] {
        tanlars(&[
            "simulate",
            "--case",
            "A1",
            "--trials",
            "12",
            "--seed",
            "3",
            "--workers",
            workers,
            "--out",
            path_str(out),
        ]);
    }
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&four).unwrap());

    let table = tanlars(&["report", "--in", path_str(&one)]);
    assert!(String::from_utf8(table.stdout).unwrap().contains("BIC1"));
    let csv = tanlars(&["report", "--in", path_str(&one), "--format", "csv"]);
    assert!(String::from_utf8(csv.stdout).unwrap().lines().count() > 1);
}

#[test]
fn generate_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("trial.csv");
    tanlars(&[
        "generate",
        "--case",
        "A1",
        "--seed",
        "9",
        "--trial",
        "2",
        "--out",
        path_str(&data),
    ]);
    for method in ["tlars", "tlasso1", "tlasso2", "l1"] {
        let path = dir.path().join(format!("{method}.csv"));
        let out = tanlars(&[
            "fit",
            "--data",
            path_str(&data),
            "--response",
            "y",
            "--family",
            "binomial",
            "--method",
            method,
            "--criterion",
            "bic1",
            "--ridge",
            "1e-6",
            "--out",
            path_str(&path),
        ]);
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.contains("bic1 selects step"), "{stdout}");
        assert!(path.exists());
        assert!(path.with_extension("meta.json").exists());
    }
}

#[test]
fn custom_case_requires_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tanlars"))
        .args([
            "simulate",
            "--case",
            "custom",
            "--out",
            path_str(&dir.path().join("r.json")),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn bad_response_domain_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "a,b,y\n1,2,0\n2,1,0.5\n3,5,1\n0,1,1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tanlars"))
        .args([
            "fit",
            "--data",
            path_str(&data),
            "--response",
            "y",
            "--family",
            "binomial",
            "--method",
            "tlars",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain"));
}
