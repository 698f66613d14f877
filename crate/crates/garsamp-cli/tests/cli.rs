//! End-to-end checks of the command-line surface: exit codes, output
//! schemas and byte-determinism of reports.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_garsamp"))
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

#[test]
fn bound_subcommand_prints_csv() {
    let out = bin()
        .args(["bound", "--config"])
        .arg(config_path("example1.json"))
        .args(["--method", "bm1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,gamma,L,region,minimizer"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("bm1,2.88"), "row: {row}");
}

#[test]
fn verify_exit_codes() {
    let ok = bin()
        .args(["verify", "--config"])
        .arg(config_path("example1.json"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));

    // A config with an inverted curvature flag fails validation with code 2.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(config_path("example1.json"))
        .unwrap()
        .replace(
            "\"monotone\": 1, \"curvature\": 1",
            "\"monotone\": 1, \"curvature\": -1",
        );
    std::fs::write(&bad, text).unwrap();
    let out = bin()
        .args(["verify", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_outputs_are_deterministic() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = bin()
            .args(["sample", "--config"])
            .arg(config_path("example2.json"))
            .args([
                "--algorithm",
                "gars",
                "--n",
                "500",
                "--seed",
                "42",
                "--rule",
                "uniform",
                "--out",
            ])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["samples.csv", "trace.csv"] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let text = std::fs::read_to_string(dir_a.path().join("samples.csv")).unwrap();
    assert!(text.starts_with("index,x\n"));
    assert!(!text.contains('\r'));
    let trace = std::fs::read_to_string(dir_a.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("sample_index,proposals,cumulative_acceptance_rate\n"));
}

#[test]
fn rs_with_overridden_gamma_reports_bound_violation() {
    // A bound above the optimum is not a bound; the run must fail loudly.
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sample", "--config"])
        .arg(config_path("example1.json"))
        .args([
            "--algorithm",
            "rs",
            "--n",
            "100",
            "--seed",
            "7",
            "--gamma",
            "4.78",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bound violation"), "stderr: {err}");
}

#[test]
fn rs_with_valid_gamma_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sample", "--config"])
        .arg(config_path("example1.json"))
        .args(["--algorithm", "rs", "--n", "200", "--seed", "7", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn gibbs_subcommand_writes_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["gibbs", "--config"])
        .arg(config_path("example3.json"))
        .args(["--n", "300", "--seed", "5", "--burn", "50", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("chain.csv")).unwrap();
    assert!(text.starts_with("index,x1,x2\n"));
    assert_eq!(text.lines().count(), 251);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("acceptance_rate,"), "stdout: {stdout}");
}

#[test]
fn experiment_requires_known_id() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["experiment", "--id", "9", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ars_subcommand_samples_log_concave_target() {
    // A linear observation with Gaussian noise and prior gives a strictly
    // convex potential, the classic sampler's home turf.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("convex.json");
    std::fs::write(
        &cfg,
        r#"{
          "name": "convex-check",
          "observations": [{
            "y": 1.5,
            "nonlinearity": {"expr": "x", "branches": [{"lo": null, "hi": null, "monotone": 1, "curvature": 1}]},
            "noise": {"family": "gaussian", "variance": 0.5}
          }],
          "prior": {"family": "gaussian", "variance": 1.0, "mode": 0.0},
          "oracle": {"lo": -8.0, "hi": 8.0, "resolution": 20000}
        }"#,
    )
    .unwrap();
    let out = bin()
        .args(["sample", "--config"])
        .arg(&cfg)
        .args(["--algorithm", "ars", "--n", "500", "--seed", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(text.lines().count(), 501);
}
