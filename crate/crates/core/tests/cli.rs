use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn pdpkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdpkit"))
        .args(args)
        .env_remove("PDPKIT_TOL")
        .output()
        .expect("binary runs")
}

fn run_on(cmd: &str, file: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--input", file.to_str().unwrap()];
    args.extend_from_slice(extra);
    pdpkit(&args)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn verify_stdout(report: &[u8]) -> Output {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(report).unwrap();
    run_on("verify", f.path(), &[])
}

#[test]
fn trace_times_identity_preserves_by_rank1() {
    let out = run_on("decide", &fixture("trace_times_identity_n3.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["rule"], "Rank1");
}

#[test]
fn rank2_refutation_round_trips_through_verify() {
    let out = run_on("decide", &fixture("rank2_not_preserving.json"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["counterexample"].is_array());
    let checked = verify_stdout(&out.stdout);
    assert_eq!(checked.status.code(), Some(0), "{}", String::from_utf8_lossy(&checked.stdout));
}

#[test]
fn tampered_counterexample_fails_verify() {
    let out = run_on("decide", &fixture("rank1_not_preserving.json"), &[]);
    let mut report = json(&out);
    // tr(A B) > 0 here, so T(A) is PD and the claim must be rejected.
    report["counterexample"] = serde_json::json!([[1.0, 0.0], [0.0, 0.1]]);
    let checked = verify_stdout(serde_json::to_string(&report).unwrap().as_bytes());
    assert_eq!(checked.status.code(), Some(1));
    assert_eq!(json(&checked)["verified"], false);
}

#[test]
fn asymmetric_input_is_rejected() {
    let out = run_on("decide", &fixture("invalid/asymmetric.json"), &[]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not symmetric"));
    let out = run_on("decide", &fixture("invalid/wrong_map_size.json"), &[]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn diagonalize_reports_generalized_eigenvalues() {
    let out = run_on("diagonalize", &fixture("diagonalize_pair.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let mu: Vec<f64> = json(&out)["mu"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((mu[0] - 0.5).abs() < 1e-12 && (mu[1] - 3.0).abs() < 1e-12);
}

#[test]
fn falsify_rejects_zero_trials() {
    let out = run_on("falsify", &fixture("rank1_not_preserving.json"), &["--trials", "0"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn falsify_finds_known_violation() {
    let out = run_on("falsify", &fixture("rank2_not_preserving.json"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(verify_stdout(&out.stdout).status.code(), Some(0));
}

#[test]
fn canonical_reports_pd_basis() {
    let out = run_on("canonical", &fixture("trace_times_identity_n3.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["rank"], 1);
}

#[test]
fn reruns_are_byte_identical() {
    for name in ["indefinite_coefficients_n2_r3.json", "identity_map_n2.json"] {
        let a = run_on("decide", &fixture(name), &["--seed", "5"]);
        let b = run_on("decide", &fixture(name), &["--seed", "5"]);
        assert_eq!(a.stdout, b.stdout, "{name}");
    }
}

#[test]
fn tolerance_precedence() {
    let file = fixture("rank1_preserving.json");
    let out = Command::new(env!("CARGO_BIN_EXE_pdpkit"))
        .args(["decide", "--input", file.to_str().unwrap()])
        .env("PDPKIT_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(json(&out)["tol"].as_f64(), Some(1e-6));
    let out = Command::new(env!("CARGO_BIN_EXE_pdpkit"))
        .args(["decide", "--input", file.to_str().unwrap(), "--tol", "1e-7"])
        .env("PDPKIT_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(json(&out)["tol"].as_f64(), Some(1e-7));
}

#[test]
fn reads_stdin_and_renders_text() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pdpkit"))
        .args(["decide", "--format", "text"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(std::fs::read(fixture("rank2_preserving.json")).unwrap().as_slice())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("outcome: Preserves"));
}
