use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hqc_core::report::{parse_transfer_csv, TRANSFER_COLUMNS};
use hqc_core::scenario::scenario_hash;

fn workdir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn hqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqc")).args(args).output().unwrap()
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.json");
    std::fs::write(&p, text).unwrap();
    p
}

const SWEEP: &str = r#"{
  "mode": "sweep",
  "scheme": "optical",
  "params": {"total_time": 4000.0},
  "gammas": [0.01, 0.0],
  "kappas": [0.0, 0.01],
  "tol": 1e-7
}"#;

#[test]
fn sweep_csv_is_deterministic_and_carries_provenance() {
    let dir = workdir("sweep");
    let sc = write_scenario(&dir, SWEEP);
    let mut files = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.join(format!("w{workers}.csv"));
        let o = hqc(&["sweep", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read_to_string(out).unwrap());
    }
    assert_eq!(files[0], files[1]);

    let text = &files[0];
    assert!(text.contains(&format!("# scenario_sha256: {}", scenario_hash(SWEEP))));
    assert!(text.lines().any(|l| l == TRANSFER_COLUMNS.join(",")));
    let rows = parse_transfer_csv(text).unwrap();
    let keys: Vec<(f64, f64)> = rows.iter().map(|r| (r.gamma, r.kappa)).collect();
    assert_eq!(keys, [(0.0, 0.0), (0.0, 0.01), (0.01, 0.0), (0.01, 0.01)]);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.fidelity));
        assert!(r.norm_loss >= 0.0);
    }
    assert!(rows[0].fidelity > 0.99);
    assert!(rows[3].fidelity < rows[1].fidelity && rows[3].fidelity < rows[2].fidelity);
}

#[test]
fn gate_mode_reports_a_small_discrepancy() {
    let dir = workdir("gate");
    let sc = write_scenario(&dir, r#"{"mode": "gate", "gate": {"kind": "ry", "angle": 0.7, "n_steps": 2000}}"#);
    let o = hqc(&["gate", "--scenario", sc.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let disc: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# discrepancy: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(disc < 1e-6, "{disc}");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
}

#[test]
fn check_runs_without_a_scenario() {
    let o = hqc(&["check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().skip_while(|l| l.starts_with('#')).skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn bad_input_exits_with_status_two() {
    let dir = workdir("bad");
    let missing = hqc(&["transfer"]);
    assert_eq!(missing.status.code(), Some(2));

    let sc = write_scenario(&dir, SWEEP);
    let wrong_mode = hqc(&["transfer", "--scenario", sc.to_str().unwrap()]);
    assert_eq!(wrong_mode.status.code(), Some(2));

    let unknown = write_scenario(&dir, r#"{"mode": "transfer", "scheme": "optical", "colour": 1}"#);
    assert_eq!(hqc(&["transfer", "--scenario", unknown.to_str().unwrap()]).status.code(), Some(2));

    let negative = write_scenario(&dir, r#"{"mode": "transfer", "scheme": "optical", "params": {"g": -1.0}}"#);
    assert_eq!(hqc(&["transfer", "--scenario", negative.to_str().unwrap()]).status.code(), Some(2));

    let empty_axis = write_scenario(&dir, r#"{"mode": "sweep", "scheme": "optical", "gammas": [], "kappas": [0.0]}"#);
    assert_eq!(hqc(&["sweep", "--scenario", empty_axis.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn tol_flag_overrides_the_scenario() {
    let dir = workdir("tol");
    let sc = write_scenario(&dir, r#"{"mode": "transfer", "scheme": "optical", "params": {"total_time": 2000.0}}"#);
    let o = hqc(&["transfer", "--scenario", sc.to_str().unwrap(), "--tol", "1e-6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("# tol: 1.00000000e-6"));
    assert_eq!(parse_transfer_csv(&text).unwrap().len(), 1);
}
