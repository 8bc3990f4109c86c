use std::fs;
use std::path::PathBuf;

use isotherm_core::harness::{
    convergence_csv, convergence_table, load_scenario, parse_scenario, run_scenario, RunOptions, RunReport, Scenario,
};
use isotherm_core::grid::read_grid_dump;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn oracle_text(h: f64) -> String {
    format!(
        r#"{{
  "name": "halfline",
  "domain": {{"kind": "half_space", "params": {{"normal": [1.0], "offset": 0.0}}, "dim": 1}},
  "problem": "ibvp",
  "nonlinearity": {{"label": "identity"}},
  "grid": {{"h": {h}, "margin": 0.05, "lo": [0.0], "hi": [2.0]}},
  "schedule": [0.005, 0.01],
  "tolerances": {{"oracle_rel": 0.01}},
  "experiments": [
    {{"kind": "oracle", "t": 0.01, "x_min": 0.1, "x_max": 1.0}},
    {{"kind": "oracle", "t": 0.005, "x_min": 0.1, "x_max": 1.0}}
  ]
}}"#
    )
}

fn oracle(h: f64) -> Scenario {
    parse_scenario(&oracle_text(h)).unwrap()
}

#[test]
fn every_shipped_fixture_loads() {
    let mut names = Vec::new();
    for entry in fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path();
        let s = load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        names.push(s.name);
    }
    names.sort();
    assert!(names.contains(&"disk_varadhan".to_string()));
    assert_eq!(names.len(), 10);
}

#[test]
fn schema_errors_name_the_field() {
    let bad = oracle_text(0.01).replace("[0.005, 0.01]", "[0.005, -0.01]");
    let e = parse_scenario(&bad).unwrap_err().to_string();
    assert!(e.contains("schedule[1] must be > 0"), "{e}");

    let bad = oracle_text(0.01).replace(r#"{"label": "identity"}"#, "{}");
    let e = parse_scenario(&bad).unwrap_err().to_string();
    assert!(e.contains("label"), "{e}");

    let bad = oracle_text(0.01).replace(r#""kind": "oracle", "t": 0.005"#, r#""kind": "spectrum", "t": 0.005"#);
    let e = parse_scenario(&bad).unwrap_err().to_string();
    assert!(e.contains("spectrum"), "{e}");

    let bad = oracle_text(0.01).replace(r#""t": 0.005,"#, r#""t": 0.007,"#);
    let e = parse_scenario(&bad).unwrap_err().to_string();
    assert!(e.contains("not in the schedule"), "{e}");
}

#[test]
fn shared_solve_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        out_dir: Some(dir.path().to_path_buf()),
        grid_dump: true,
        ..Default::default()
    };
    let r = run_scenario(&oracle(1.0 / 128.0), &opts).unwrap();
    assert_eq!(r.solves.len(), 1);
    assert_eq!(r.timing.solves.len(), 1);
    assert_eq!(r.experiments.len(), 2);
    assert!(r.pass);
    for f in ["report.json", "timing.json", "00_oracle.csv", "01_oracle.csv", "u_00.bin", "u_00.json", "u_01.bin"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert!(v.get("timing").is_none());
    let (grid, name, values) = read_grid_dump(dir.path(), "u_01").unwrap();
    assert!(name.contains("0.01") || name.contains("1e-2"), "{name}");
    assert_eq!(grid, r.grid);
    assert_eq!(values.len(), grid.node_count());

    // isolation: a fresh directory reproduces the report byte for byte
    let again = tempfile::tempdir().unwrap();
    let opts2 = RunOptions {
        out_dir: Some(again.path().to_path_buf()),
        ..opts
    };
    run_scenario(&oracle(1.0 / 128.0), &opts2).unwrap();
    assert_eq!(
        fs::read(dir.path().join("report.json")).unwrap(),
        fs::read(again.path().join("report.json")).unwrap()
    );
}

#[test]
fn impossible_tolerance_fails_but_writes_report() {
    let mut s = oracle(1.0 / 64.0);
    s.tolerances.oracle_rel = 0.0;
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        out_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let r = run_scenario(&s, &opts).unwrap();
    assert!(!r.pass);
    assert!(r.experiments.iter().all(|e| !e.pass && e.error.is_none()));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn solver_failure_gives_partial_report() {
    let mut s = oracle(1.0 / 64.0);
    s.solver.newton_max = 0;
    let r = run_scenario(&s, &RunOptions::default()).unwrap();
    assert!(!r.pass);
    assert!(r.solves[0].error.is_some());
    assert_eq!(r.experiments.len(), 2);
    assert!(r.experiments.iter().all(|e| e.error.as_deref().is_some_and(|m| m.contains("solve failed"))));
}

#[test]
fn only_filter_selects_experiments() {
    let opts = RunOptions {
        only: Some("varadhan".into()),
        ..Default::default()
    };
    assert!(run_scenario(&oracle(1.0 / 64.0), &opts).is_err());
}

fn reports(hs: &[f64]) -> Vec<RunReport> {
    hs.iter().map(|&h| run_scenario(&oracle(h), &RunOptions::default()).unwrap()).collect()
}

#[test]
fn convergence_rows_per_refinement() {
    let rs = reports(&[1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]);
    let rows = convergence_table(&rs).unwrap();
    // two metrics, two refinements
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(!r.flagged);
        assert!(r.order > 0.5 && r.order < 1.5, "{r:?}");
    }
    assert!(convergence_csv(&rows).starts_with("metric,h_coarse"));

    let mut same = rs[1].clone();
    same.grid = rs[0].grid.clone();
    assert!(convergence_table(&[rs[0].clone(), same]).is_err());

    let mut flat = rs[1].clone();
    flat.experiments = rs[0].experiments.clone();
    let rows = convergence_table(&[rs[0].clone(), flat]).unwrap();
    assert!(rows.iter().all(|r| r.flagged && r.order == 0.0));

    let mut other = rs[1].clone();
    other.scenario.name = "other".into();
    let e = convergence_table(&[rs[0].clone(), other]).unwrap_err().to_string();
    assert!(e.contains("different scenarios"), "{e}");
}
