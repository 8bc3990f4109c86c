use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use statrs::function::erf::erfc;

use super::scenario::{Experiment, HeatContentMode, PairSpec, ProbeSet, Scenario, Tolerances, SCHEMA_VERSION};
use crate::asymptotics::{heat_content_divergence, heat_content_limit, varadhan_report, AsymptoticReport};
use crate::comparison::{check_envelope, check_subsuper, fit_barrier_constants, t1_epsilon};
use crate::detectors::{
    boundary_components, classify_boundary, difference_mean_balance, moment_balance, Classification,
    ClassifyOptions,
};
use crate::error::{Error, Result};
use crate::geometry::{axpy, build_signed_distance, point, sample_boundary, Point, SignedDistanceField};
use crate::grid::{write_grid_dump, GridSpec};
use crate::nonlinearity::Nonlinearity;
use crate::solver::{solve, ProblemKind, SolutionSeries, SolverStats};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub grid_dump: bool,
    /// Restrict to experiments of this kind.
    pub only: Option<String>,
    /// Solve (and dump) without running experiments.
    pub solve_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    /// Identifies the (domain, problem, nonlinearity, grid, schedule) tuple.
    pub key: String,
    /// Solver counters; wall-clock time is reported in the timing file.
    pub stats: Option<SolverStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub index: usize,
    pub kind: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, f64>,
    pub report: Value,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub solves: Vec<(String, f64)>,
    pub experiments: Vec<(String, f64)>,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub grid: GridSpec,
    pub schedule: Vec<f64>,
    pub solves: Vec<SolveRecord>,
    pub experiments: Vec<ExperimentRecord>,
    pub pass: bool,
    /// Written to `timing.json`, never to `report.json`.
    #[serde(skip)]
    pub timing: Timing,
}

impl RunReport {
    /// The report as written to `report.json`; free of timings, so repeated
    /// runs of one scenario give identical bytes.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Outcome {
    pass: bool,
    metrics: BTreeMap<String, f64>,
    report: Value,
    csv: Option<String>,
}

fn outcome<T: Serialize>(pass: bool, metrics: &[(&str, f64)], report: &T, csv: Option<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        report: serde_json::to_value(report)?,
        csv,
    })
}

struct Context<'a> {
    scenario: &'a Scenario,
    grid: GridSpec,
    n: Nonlinearity,
    series: SolutionSeries,
    sdf: Option<SignedDistanceField>,
}

impl Context<'_> {
    fn sdf(&mut self) -> Result<&SignedDistanceField> {
        if self.sdf.is_none() {
            self.sdf = Some(build_signed_distance(&self.scenario.domain, &self.grid)?);
        }
        Ok(self.sdf.as_ref().unwrap())
    }

    fn tol(&self) -> &Tolerances {
        &self.scenario.tolerances
    }
}

fn solve_key(s: &Scenario, grid: &GridSpec) -> String {
    format!(
        "{}|{}|{}|h={:e}|n={}|t={:?}",
        s.domain.kind(),
        s.problem.as_str(),
        s.nonlinearity.label,
        grid.max_spacing(),
        grid.node_count(),
        s.schedule
    )
}

/// Runs every experiment of the scenario against a single shared solve and,
/// with an output directory, writes `report.json`, `timing.json`, per
/// experiment CSV tables and optional grid dumps.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    let clock = Instant::now();
    s.validate()?;
    let grid = s.build_grid()?;
    let n = s.nonlinearity()?;
    let key = solve_key(s, &grid);
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: s.clone(),
        grid: grid.clone(),
        schedule: s.schedule.clone(),
        solves: Vec::new(),
        experiments: Vec::new(),
        pass: true,
        timing: Timing::default(),
    };
    let selected: Vec<(usize, &Experiment)> = s
        .experiments
        .iter()
        .enumerate()
        .filter(|(_, e)| !opts.solve_only && opts.only.as_deref().map_or(true, |k| k == e.kind()))
        .collect();
    if let Some(k) = &opts.only {
        if selected.is_empty() {
            return Err(Error::Config(format!("scenario `{}` has no `{k}` experiment", s.name)));
        }
    }
    let out = opts.out_dir.clone().or_else(|| s.output_dir.clone());
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
    }
    info!("solving {key}");
    let t0 = Instant::now();
    let solved = solve(s.problem, &s.domain, &n, &grid, &s.schedule, &s.stepping(), &s.solver);
    report.timing.solves.push((key.clone(), t0.elapsed().as_secs_f64()));
    let series = match solved {
        Ok(mut series) => {
            let mut stats = series.stats.clone();
            stats.seconds = 0.0;
            report.solves.push(SolveRecord {
                key,
                stats: Some(stats),
                error: None,
            });
            series.stats.seconds = 0.0;
            series
        }
        Err(e) => {
            warn!("solve failed: {e}");
            report.solves.push(SolveRecord {
                key,
                stats: None,
                error: Some(e.to_string()),
            });
            for (index, ex) in selected {
                report.experiments.push(ExperimentRecord {
                    index,
                    kind: ex.kind().into(),
                    pass: false,
                    metrics: BTreeMap::new(),
                    report: Value::Null,
                    error: Some(format!("solve failed: {e}")),
                });
            }
            report.pass = false;
            report.timing.total = clock.elapsed().as_secs_f64();
            if let Some(dir) = &out {
                write_outputs(dir, &report, &[])?;
            }
            return Ok(report);
        }
    };
    if let (Some(dir), true) = (&out, opts.grid_dump) {
        for (k, snap) in series.snapshots.iter().enumerate() {
            write_grid_dump(dir, &format!("u_{k:02}"), &grid, &snap.field, &format!("u(t={:e})", snap.t))?;
        }
    }
    let mut ctx = Context {
        scenario: s,
        grid,
        n,
        series,
        sdf: None,
    };
    let mut tables = Vec::new();
    for (index, ex) in selected {
        let t = Instant::now();
        let result = run_experiment(&mut ctx, ex);
        let label = format!("{index:02}_{}", ex.kind());
        report.timing.experiments.push((label.clone(), t.elapsed().as_secs_f64()));
        let record = match result {
            Ok(o) => {
                if let Some(csv) = o.csv {
                    tables.push((format!("{label}.csv"), csv));
                }
                ExperimentRecord {
                    index,
                    kind: ex.kind().into(),
                    pass: o.pass,
                    metrics: o.metrics,
                    report: o.report,
                    error: None,
                }
            }
            Err(e) => {
                warn!("experiment {label} failed: {e}");
                ExperimentRecord {
                    index,
                    kind: ex.kind().into(),
                    pass: false,
                    metrics: BTreeMap::new(),
                    report: Value::Null,
                    error: Some(e.to_string()),
                }
            }
        };
        report.pass &= record.pass;
        report.experiments.push(record);
    }
    report.timing.total = clock.elapsed().as_secs_f64();
    if let Some(dir) = &out {
        write_outputs(dir, &report, &tables)?;
    }
    Ok(report)
}

fn write_outputs(dir: &Path, report: &RunReport, tables: &[(String, String)]) -> Result<()> {
    fs::write(dir.join("report.json"), report.to_json()?)?;
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&report.timing)?)?;
    for (name, csv) in tables {
        fs::write(dir.join(name), csv)?;
    }
    Ok(())
}

fn run_experiment(ctx: &mut Context, ex: &Experiment) -> Result<Outcome> {
    match ex {
        Experiment::Oracle { t, x_min, x_max } => oracle(ctx, *t, *x_min, *x_max),
        Experiment::Varadhan {
            ladder,
            probes,
            monotone_only,
        } => varadhan(ctx, ladder, probes, *monotone_only),
        Experiment::HeatContent { x0, radius, ladder, mode } => {
            let x0 = point(x0);
            let rep: AsymptoticReport = match mode {
                HeatContentMode::Limit => heat_content_limit(&ctx.series, &x0, *radius, ladder, ctx.tol().heat_content_rel)?,
                HeatContentMode::Divergence => heat_content_divergence(&ctx.series, &x0, *radius, ladder)?,
            };
            let m = [
                ("extrapolated", rep.extrapolated),
                ("prediction", rep.prediction),
                ("relative_error", rep.relative_error),
            ];
            outcome(rep.pass, &m, &rep, Some(rep.to_csv()))
        }
        Experiment::Barriers {
            epsilon,
            rho0,
            radius,
            envelope_times,
            subsuper_ladder,
        } => barriers(ctx, *epsilon, *rho0, *radius, envelope_times, subsuper_ladder.as_deref()),
        Experiment::Balance {
            x0,
            radii,
            times,
            expect_radial,
            pairs,
        } => balance(ctx, &point(x0), radii, times, *expect_radial, pairs),
        Experiment::Detect { inner, times, expect } => detect(ctx, inner, times, expect.as_deref()),
    }
}

fn oracle(ctx: &mut Context, t: f64, x_min: f64, x_max: f64) -> Result<Outcome> {
    if !ctx.n.is_identity() {
        return Err(Error::Config("the half-line oracle needs the identity nonlinearity".into()));
    }
    let problem = ctx.scenario.problem;
    let tol = ctx.tol().oracle_rel;
    let field = ctx.series.snapshot(t)?.field.clone();
    let sdf = ctx.sdf()?;
    let (mut err, mut scale, mut nodes) = (0.0f64, 0.0f64, 0usize);
    let mut csv = String::from("d,u,exact\n");
    for (i, &d) in sdf.values.iter().enumerate() {
        if d < x_min || d > x_max {
            continue;
        }
        let exact = match problem {
            ProblemKind::Ibvp => erfc(d / (2.0 * t.sqrt())),
            ProblemKind::Cauchy => 0.5 * erfc(d / (2.0 * t.sqrt())),
        };
        err = err.max((field[i] - exact).abs());
        scale = scale.max(exact);
        nodes += 1;
        if sdf.grid.dim() == 1 {
            csv.push_str(&format!("{d:e},{:e},{exact:e}\n", field[i]));
        }
    }
    if nodes == 0 {
        return Err(Error::Config(format!("no grid node has d in [{x_min}, {x_max}]")));
    }
    let rel = err / scale;
    let rep = serde_json::json!({
        "t": t, "window": [x_min, x_max], "nodes": nodes,
        "max_error": err, "max_exact": scale, "max_rel_error": rel, "tolerance": tol,
    });
    outcome(rel < tol, &[("max_rel_error", rel)], &rep, Some(csv))
}

/// Probe points for a band `{d_min <= d <= d_max}` placed along inward
/// normals of evenly chosen boundary samples.
pub fn band_probes(ctx_domain: &crate::geometry::DomainSpec, d_min: f64, d_max: f64, count: usize, levels: usize) -> Result<Vec<Point>> {
    let per = count / levels;
    let samples = sample_boundary(ctx_domain, 64.0)?;
    if samples.len() < per {
        return Err(Error::Config(format!("only {} boundary samples for {per} probe columns", samples.len())));
    }
    let mut pts = Vec::with_capacity(count);
    for j in 0..levels {
        let d = if levels == 1 {
            0.5 * (d_min + d_max)
        } else {
            d_min + (d_max - d_min) * j as f64 / (levels - 1) as f64
        };
        for k in 0..per {
            let s = &samples[((k as f64 + 0.5) * samples.len() as f64 / per as f64) as usize];
            pts.push(axpy(&s.point, d, &s.inward_normal));
        }
    }
    Ok(pts)
}

fn varadhan(ctx: &mut Context, ladder: &[f64], probes: &ProbeSet, monotone_only: bool) -> Result<Outcome> {
    let pts = match probes {
        ProbeSet::Band {
            d_min,
            d_max,
            count,
            levels,
        } => band_probes(&ctx.scenario.domain, *d_min, *d_max, *count, *levels)?,
        ProbeSet::Points { points } => points.iter().map(|p| point(p)).collect(),
    };
    let rel_tol = (!monotone_only).then_some(ctx.tol().varadhan_rel);
    let n = ctx.n.clone();
    let sdf = ctx.sdf()?.clone();
    let rep = varadhan_report(&ctx.series, &n, &sdf, &pts, ladder, rel_tol)?;
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    let m = [
        ("sup_error_last", last(&rep.estimates)),
        ("rel_error_last", rep.relative_error),
        ("extrapolated", rep.extrapolated),
    ];
    outcome(rep.pass, &m, &rep, Some(rep.to_csv()))
}

fn barriers(
    ctx: &mut Context,
    eps: f64,
    rho0: f64,
    radius: f64,
    envelope_times: &[f64],
    ladder: Option<&[f64]>,
) -> Result<Outcome> {
    if !ctx.n.is_identity() {
        return Err(Error::Config("barriers are defined for the heat equation only".into()));
    }
    let sdf = ctx.sdf()?.clone().with_band(rho0);
    let t1 = t1_epsilon(&sdf, eps)?;
    let ladder: Vec<f64> = match ladder {
        Some(l) => l.to_vec(),
        None => {
            let v: Vec<f64> = ctx.scenario.schedule.iter().copied().filter(|&t| t <= t1).collect();
            if v.is_empty() {
                vec![0.5 * t1]
            } else {
                v
            }
        }
    };
    let subsuper = check_subsuper(&sdf, eps, &ladder)?;
    let fit = fit_barrier_constants(&ctx.series, &sdf, eps, radius)?;
    if let Some(&t) = envelope_times.iter().find(|&&t| t > fit.t_epsilon * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "envelope time {t:e} exceeds t_eps = {:e} (t0 = {:e}, t1 = {:e})",
            fit.t_epsilon, fit.t0, fit.t1_epsilon
        )));
    }
    let env = check_envelope(&ctx.series, &sdf, &fit.config, envelope_times)?;
    let violations: usize = env.snapshots.iter().map(|s| s.below + s.above).sum();
    let mut csv = String::from("t,nodes,below,above,worst_lower,worst_upper\n");
    for s in &env.snapshots {
        csv.push_str(&format!("{:e},{},{},{},{:e},{:e}\n", s.t, s.nodes, s.below, s.above, s.worst_lower, s.worst_upper));
    }
    let m = [
        ("t1_epsilon", t1),
        ("t_epsilon", fit.t_epsilon),
        ("e1", fit.config.e1),
        ("e2", fit.config.e2),
        ("violations", violations as f64),
    ];
    let rep = serde_json::json!({ "subsuper": subsuper, "fit": fit, "envelope": env });
    outcome(subsuper.pass && env.pass, &m, &rep, Some(csv))
}

fn balance(
    ctx: &mut Context,
    x0: &Point,
    radii: &[f64],
    times: &[f64],
    expect_radial: bool,
    pairs: &[PairSpec],
) -> Result<Outcome> {
    let tol = ctx.tol().clone();
    let mut rows = Vec::new();
    let mut worst_moment = 0.0f64;
    let mut csv = String::from("r,t,moment_norm\n");
    for &r in radii {
        for &t in times {
            let m = moment_balance(&ctx.series, x0, r, t)?;
            let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst_moment = worst_moment.max(norm);
            csv.push_str(&format!("{r:e},{t:e},{norm:e}\n"));
            rows.push(serde_json::json!({"r": r, "t": t, "moment": m, "norm": norm}));
        }
    }
    let mut pass = !expect_radial || worst_moment <= tol.balance_zero;
    let mut pair_rows = Vec::new();
    for p in pairs {
        let v = difference_mean_balance(&ctx.series, &point(&p.p), &point(&p.q), p.r, p.t)?;
        let ok = if p.symmetric { v.abs() <= tol.pair_zero } else { v.abs() > tol.pair_nonzero };
        pass &= ok;
        pair_rows.push(serde_json::json!({"pair": p, "value": v, "pass": ok}));
    }
    let rep = serde_json::json!({"x0": x0, "moments": rows, "worst_moment": worst_moment, "pairs": pair_rows});
    outcome(pass, &[("worst_moment", worst_moment)], &rep, Some(csv))
}

fn detect(ctx: &mut Context, inner: &crate::geometry::DomainSpec, times: &[f64], expect: Option<&str>) -> Result<Outcome> {
    let h = ctx.grid.max_spacing();
    let (rel, abs) = (ctx.tol().stationary_rel, ctx.tol().stationary_abs);
    let domain = ctx.scenario.domain.clone();
    let sdf = ctx.sdf()?.clone();
    let density = 1.0 / h;
    let samples = sample_boundary(inner, density)?;
    // the component of the inner boundary nearest the outer boundary
    let comps = boundary_components(&samples, 4.0 / density);
    let mean_d = |c: &Vec<usize>| c.iter().map(|&i| sdf.value(&samples[i].point)).sum::<f64>() / c.len() as f64;
    let best = comps.iter().map(mean_d).fold(f64::INFINITY, f64::min);
    let comp = comps
        .iter()
        .find(|c| mean_d(c) <= best + 3.0 * h)
        .ok_or_else(|| Error::Geometry("inner domain has no boundary samples".into()))?;
    let gamma: Vec<_> = comp.iter().map(|&i| samples[i].clone()).collect();
    let mut opts = ClassifyOptions::new(times);
    opts.rel_tol = rel;
    opts.abs_tol = abs;
    let rep = classify_boundary(&domain, inner, &gamma, &ctx.series, &sdf, &opts)?;
    let c = rep.classification;
    let pass = match expect {
        Some("sphere") => c == Classification::Sphere,
        Some("two_concentric_spheres") => c == Classification::TwoConcentricSpheres,
        Some(_) => c != Classification::Sphere,
        None => matches!(c, Classification::Sphere | Classification::TwoConcentricSpheres),
    };
    let mut csv = String::from("x,y,z,d\n");
    for s in &gamma {
        let p = s.point;
        csv.push_str(&format!("{:e},{:e},{:e},{:e}\n", p[0], p[1], p[2], sdf.value(&p)));
    }
    let radius = rep.constant_distance.as_ref().map_or(f64::NAN, |c| c.radius);
    outcome(pass, &[("recovered_radius", radius)], &rep, Some(csv))
}
