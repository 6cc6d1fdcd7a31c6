//! End-to-end checks of the command-line interface: subcommand output,
//! file formats, and exit codes.

use std::process::Command;

use plstomo::harness::strip_runtime_column;
use plstomo::linalg::{read_matrix_file, write_matrix_file, DensityMatrix, HermitianMatrix};
use plstomo::measurements::{build_mub_scheme, write_vector_set};

fn plstomo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plstomo"))
}

fn stdout_of(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn estimate_exact_recovers_state_and_writes_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("rho_hat.txt");
    let out = plstomo()
        .args([
            "estimate",
            "--scheme",
            "mub",
            "--d",
            "3",
            "--exact",
            "--seed",
            "4",
            "--out",
        ])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    assert!(text.contains("\"trace_error\":"), "summary line: {text}");
    assert!(text.contains("\"x0\":"));
    // exact probabilities mean the projected estimate equals the target state
    let trace_error: f64 = text
        .split("\"trace_error\":")
        .nth(1)
        .unwrap()
        .split([',', '}'])
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(trace_error < 1e-9);

    let m = read_matrix_file(&out_path).unwrap();
    assert_eq!(m.nrows(), 3);
    let rho = DensityMatrix::new(HermitianMatrix::new(m).unwrap()).unwrap();
    assert!((rho.eigenvalues().iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn simulate_emits_json_and_counts_csv() {
    let dir = tempfile::tempdir().unwrap();
    let counts_path = dir.path().join("counts.csv");
    let out = plstomo()
        .args([
            "simulate",
            "--scheme",
            "pauli-basis",
            "--k",
            "2",
            "--n",
            "1800",
            "--seed",
            "3",
            "--counts-out",
        ])
        .arg(&counts_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).starts_with("{\"scheme\":\"pauli-basis\""));

    let csv = std::fs::read_to_string(&counts_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "setting,outcome,count,shots");
    // 9 settings x 4 outcomes
    assert_eq!(lines.count(), 36);
    let total: u64 = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 1800);
}

#[test]
fn verify_design_pass_and_fail() {
    let dir = tempfile::tempdir().unwrap();

    let mub = build_mub_scheme(3, true).unwrap();
    let good = dir.path().join("mub3.txt");
    let mut f = std::fs::File::create(&good).unwrap();
    write_vector_set(&mut f, 3, mub.settings(), mub.vectors()).unwrap();
    let out = plstomo().args(["verify-design", "--file"]).arg(&good).output().unwrap();
    assert!(out.status.success());
    assert!(stdout_of(&out).contains("pass"));

    // a single orthonormal basis is not a 2-design
    let single = dir.path().join("single.txt");
    std::fs::write(&single, "2 2 1\n1 0 0 0\n0 0 1 0\n").unwrap();
    let out = plstomo().args(["verify-design", "--file"]).arg(&single).output().unwrap();
    assert!(out.status.success());
    assert!(stdout_of(&out).contains("fail"));
}

#[test]
fn bound_values_match_formulas() {
    let out = plstomo()
        .args([
            "bound", "--which", "samples", "--d", "5", "--r", "1", "--eps", "0.1", "--delta",
            "0.05", "--scheme", "mub",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: f64 = stdout_of(&out).trim().parse().unwrap();
    assert_eq!(v as u64, 198_023);

    let out = plstomo()
        .args([
            "bound", "--which", "thm1", "--d", "5", "--n", "1000", "--r", "1", "--eps", "0.5",
            "--scheme", "mub",
        ])
        .output()
        .unwrap();
    let v: f64 = stdout_of(&out).trim().parse().unwrap();
    let expected = 5.0 * (-1000.0_f64 * 0.25 / (43.0 * 10.0)).exp();
    assert!((v - expected).abs() < 1e-9 * expected);
}

#[test]
fn sweep_respects_config_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sweep.cfg");
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    std::fs::write(
        &cfg_path,
        "scheme = mub\ndims = 3\nn = 500,1000\ntrials = 3\nseed = 12\n",
    )
    .unwrap();
    for (csv, width) in [(&csv_a, "1"), (&csv_b, "4")] {
        let out = plstomo()
            .args(["sweep", "--config"])
            .arg(&cfg_path)
            .args(["--parallelism", width, "--out"])
            .arg(csv)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout_of(&out).contains("fitted_slope"));
    }
    let a = strip_runtime_column(&std::fs::read_to_string(&csv_a).unwrap());
    let b = strip_runtime_column(&std::fs::read_to_string(&csv_b).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 6, "header plus 6 data rows");
}

#[test]
fn coverage_exit_codes() {
    // vacuous bounds: success
    let out = plstomo()
        .args([
            "coverage", "--scheme", "mub", "--dims", "2", "--n", "60", "--trials", "100",
            "--seed", "5", "--bound", "thm1", "--eps", "0.4,0.6",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).contains("vacuous-pass"));
    assert!(stdout_of(&out).contains("violations=0"));
}

#[test]
fn config_errors_exit_2_and_numerical_failures_exit_3() {
    // unknown scheme
    let out = plstomo()
        .args(["estimate", "--scheme", "warp", "--d", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // composite dimension for MUBs
    let out = plstomo()
        .args(["simulate", "--scheme", "mub", "--d", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // a matrix that is not a state: numerical failure
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    write_matrix_file(
        HermitianMatrix::from_diagonal(&[2.0, -1.0]).matrix(),
        &bad,
    )
    .unwrap();
    let out = plstomo()
        .args(["simulate", "--scheme", "mub", "--d", "2", "--state"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
