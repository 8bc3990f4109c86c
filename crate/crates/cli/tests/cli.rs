use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scenario(dir: &Path, tolerance: f64) -> std::path::PathBuf {
    let text = format!(
        r#"{{
  "name": "halfline",
  "domain": {{"kind": "half_space", "params": {{"normal": [1.0], "offset": 0.0}}, "dim": 1}},
  "problem": "ibvp",
  "nonlinearity": {{"label": "identity"}},
  "grid": {{"h": 0.015625, "margin": 0.05, "lo": [0.0], "hi": [2.0]}},
  "schedule": [0.01],
  "tolerances": {{"oracle_rel": {tolerance}}},
  "experiments": [{{"kind": "oracle", "t": 0.01, "x_min": 0.1, "x_max": 1.0}}]
}}"#
    );
    let path = dir.join(format!("halfline_{tolerance}.json"));
    fs::write(&path, text).unwrap();
    path
}

fn lab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_isotherm-lab"));
    cmd.args(args).env("RUST_LOG", "warn");
    match threads {
        Some(t) => cmd.env("ISOTHERM_THREADS", t),
        None => cmd.env_remove("ISOTHERM_THREADS"),
    };
    cmd.output().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_report_and_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), 0.05);
    let out = tmp.path().join("out");
    let o = lab(&["run", s.to_str().unwrap(), "--out", out.to_str().unwrap(), "--grid-dump"], Some("1"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[PASS] 00 oracle"));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["experiments"].as_array().unwrap().len(), 1);
    let dump = fs::read(out.join("u_00.bin")).unwrap();
    let nodes = r["grid"]["extents"][0].as_u64().unwrap() as usize + 1;
    assert_eq!(dump.len(), 8 * nodes);
    let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("u_00.json")).unwrap()).unwrap();
    assert!(sidecar.get("spacing").is_some());
}

#[test]
fn failing_tolerance_exits_nonzero_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), 0.0);
    let out = tmp.path().join("out");
    let o = lab(&["run", s.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&out)["pass"], false);
}

#[test]
fn h_override_and_solve_only() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), 0.05);
    let out = tmp.path().join("out");
    let o = lab(&["solve", s.to_str().unwrap(), "--out", out.to_str().unwrap(), "--h", "0.03125"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["scenario"]["grid"]["h"], 0.03125);
    assert_eq!(r["grid"]["spacing"][0], 0.03125);
    assert!(r["experiments"].as_array().unwrap().is_empty());
}

#[test]
fn errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario(tmp.path(), 0.05);
    let path = s.to_str().unwrap();
    // no varadhan experiment in the scenario
    assert_eq!(lab(&["varadhan", path], None).status.code(), Some(2));
    assert_eq!(lab(&["run", "/nonexistent/scenario.json"], None).status.code(), Some(2));
    assert_eq!(lab(&["run", path, "--h", "-1"], None).status.code(), Some(2));
    let o = lab(&["run", path], Some("many"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ISOTHERM_THREADS"));
}

#[test]
fn shipped_fixture_runs_through_subcommand() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/disk_balance.json");
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(
        &["balance", fixture.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--h", "0.03125"],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(tmp.path().join("00_balance.csv").exists());
}
