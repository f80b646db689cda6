//! The binary: `validate`, `run`, output layout and failure handling.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bilinear-steer"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const EIGEN: &str = "mode = eigensolve\ncells = 100\nmodes = 3\nassert = axis1.lambda.1 < -9\n";

#[test]
fn validate_prints_ok() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "e.conf", EIGEN);
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

#[test]
fn run_writes_summary_and_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "e.conf", EIGEN);
    let out_dir = d.path().join("out");
    let out = bin()
        .args(["--threads", "1", "--out"])
        .arg(&out_dir)
        .arg("run")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    let line = summary.lines().find(|l| l.starts_with("axis1.lambda.1 =")).unwrap();
    assert!(line.ends_with("[pass]"), "{line}");
    // 12 significant digits
    let value = line.split_whitespace().nth(2).unwrap();
    assert_eq!(
        value
            .trim_start_matches('-')
            .replace('.', "")
            .trim_start_matches('0')
            .len(),
        12,
        "{value}"
    );
    assert!(out_dir.join("basis_axis1.csv").exists());
}

#[test]
fn failed_assertion_exits_nonzero_with_failure_list() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "e.conf",
        "mode = eigensolve\ncells = 100\nmodes = 2\nassert = axis1.lambda.1 > 0\n",
    );
    let out_dir = d.path().join("out");
    let out = bin().arg("--out").arg(&out_dir).arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fail\taxis1.lambda.1"));
    assert!(out_dir.join("summary.txt").exists());
}

#[test]
fn malformed_config_names_line_and_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.conf", "mode = eigensolve\ncells = lots\n");
    let out_dir = d.path().join("out");
    let out = bin().arg("--out").arg(&out_dir).arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn invalid_config_fails_validation() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "bad.conf",
        "mode = steer\ncells = 8\ninitial = sine_cut 0.3\ntarget = sine_cut 1.5\n",
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("cells must be at least 16") && err.contains("outside the box"),
        "{err}"
    );
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let out = bin().arg("validate").arg(&p).output().unwrap();
        assert!(
            out.status.success(),
            "{}: {}",
            p.display(),
            String::from_utf8_lossy(&out.stderr)
        );
        n += 1;
    }
    assert_eq!(n, 5);
}

#[test]
fn steer_config_runs_end_to_end() {
    let d = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/steer.conf");
    let out = bin().arg("--out").arg(d.path()).arg("run").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(d.path().join("summary.txt")).unwrap();
    assert!(summary.contains("pattern_match = true [pass]"));
    for f in ["plan.txt", "report.txt", "final.csv", "u_star.csv", "fourier.csv"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
}
