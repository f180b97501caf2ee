//! The binary's subcommands, overrides and exit codes on small grids.

use std::path::Path;
use std::process::{Command, Output};

fn choquard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_choquard")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = "\
grid.M = 16
grid.L = 16
evolve.dt = 0.01
evolve.T = 0.2
evolve.diag_stride = 5
evolve.snapshot_every = 0.1
scan.amplitudes = 0.5, 1.4
";

#[test]
fn validate_reference_set_exits_zero() {
    let out = choquard(&["validate"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("s_c"), "{text}");
}

#[test]
fn validate_mass_critical_boundary_is_a_domain_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.p = 2\n");
    assert_eq!(code(&choquard(&["validate", "--config", &cfg])), 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&choquard(&[])), 2);
    assert_eq!(code(&choquard(&["integrate"])), 2);
    assert_eq!(code(&choquard(&["evolve", "--dt"])), 2);
    assert_eq!(code(&choquard(&["evolve", "--grid-M", "many"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.M = 16\nevolve.steps = 3\n");
    let out = choquard(&["validate", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("evolve.steps"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&choquard(&["--help"])), 0);
    assert_eq!(code(&choquard(&["scan", "--help"])), 0);
}

#[test]
fn missing_config_file_is_reported() {
    let out = choquard(&["validate", "--config", "/nonexistent/run.cfg"]);
    assert_ne!(code(&out), 0);
}

#[test]
fn evolve_without_ground_state_fails_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = choquard(&["evolve", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ground-state"));
}

#[test]
fn ground_state_evolve_scan_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out_s = out_dir.to_str().unwrap();

    let gs = choquard(&["ground-state", "--config", &cfg, "--out", out_s]);
    assert_eq!(code(&gs), 0, "{}", String::from_utf8_lossy(&gs.stderr));
    let thresholds = std::fs::read_to_string(out_dir.join("thresholds.csv")).unwrap();
    let mut lines = thresholds.lines();
    assert!(lines.next().unwrap().starts_with("N,alpha,b,p,s_c,A,B,massQ"));
    assert_eq!(lines.next().unwrap().split(',').count(), 17);

    // the flags override the config file
    let ev = choquard(&["evolve", "--config", &cfg, "--out", out_s, "--dt", "0.02", "--T", "0.1"]);
    assert_eq!(code(&ev), 0, "{}", String::from_utf8_lossy(&ev.stderr));
    let resolved = std::fs::read_to_string(out_dir.join("config.resolved")).unwrap();
    assert!(resolved.contains("evolve.dt = 0.02"), "{resolved}");
    assert!(resolved.contains("evolve.T = 0.1"), "{resolved}");
    let verdict = std::fs::read_to_string(out_dir.join("verdict.txt")).unwrap();
    assert!(verdict.contains("verdict = "), "{verdict}");
    assert!(out_dir.join("diagnostics.csv").exists());

    let sc = choquard(&["scan", "--config", &cfg, "--out", out_s]);
    assert_eq!(code(&sc), 0, "{}", String::from_utf8_lossy(&sc.stderr));
    let table = std::fs::read_to_string(out_dir.join("scan.csv")).unwrap();
    assert_eq!(table.lines().count(), 3, "{table}");
}

#[test]
fn grid_override_must_match_the_ground_state_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out_s = out_dir.to_str().unwrap();
    assert_eq!(code(&choquard(&["ground-state", "--config", &cfg, "--out", out_s])), 0);
    let ev = choquard(&["evolve", "--config", &cfg, "--out", out_s, "--grid-M", "24"]);
    assert_eq!(code(&ev), 1);
}
