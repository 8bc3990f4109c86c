//! Backward-Euler solvers for `u_t = Delta phi(u)` with boundary value 1
//! (initial-boundary value problem) or initial value `chi` of the complement
//! (Cauchy problem), on uniform grids with embedded boundaries.

mod newton;
mod operator;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, DomainSpec, Point};
use crate::grid::GridSpec;
use crate::nonlinearity::Nonlinearity;
use newton::{newton_step, polish_tail, SweepLayout};
use operator::Operator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Ibvp,
    Cauchy,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::Ibvp => "ibvp",
            ProblemKind::Cauchy => "cauchy",
        }
    }
}

/// Geometric time stepping: `dt` starts at `dt_initial`, grows by `growth`
/// per step up to `dt_max`, and is shortened to land on scheduled times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stepping {
    pub dt_initial: f64,
    pub growth: f64,
    pub dt_max: f64,
}

impl Stepping {
    /// Defaults tied to the spacing: `dt` from `h^2 / 1000` up to `h / 256`.
    pub fn for_spacing(h: f64) -> Self {
        Self {
            dt_initial: 1e-3 * h * h,
            growth: 1.05,
            dt_max: h / 256.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt_initial > 0.0 && self.dt_max >= self.dt_initial && self.growth >= 1.0) {
            return Err(Error::Config(format!(
                "stepping needs 0 < dt_initial <= dt_max and growth >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub newton_max: usize,
    pub cg_rel_tol: f64,
    /// Re-solve nodes below `polish_threshold` with positive sweeps after each step.
    pub tail_polish: bool,
    pub polish_threshold: f64,
    pub polish_tol: f64,
    pub polish_max_rounds: usize,
    /// Smallest cut fraction used for boundary links.
    pub theta_min: f64,
    /// Sub-samples per axis and cell when rasterizing Cauchy data.
    pub subsamples: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            newton_max: 50,
            cg_rel_tol: 1e-12,
            tail_polish: false,
            polish_threshold: 1e-4,
            polish_tol: 1e-11,
            polish_max_rounds: 60,
            theta_min: 1e-6,
            subsamples: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub unknowns: usize,
    pub steps: u64,
    pub newton_iterations: u64,
    pub cg_iterations: u64,
    pub polish_rounds: u64,
    /// Nodes clamped back into `[0, 1]` by more than 1e-12.
    pub range_violations: u64,
    pub max_range_violation: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: Vec<f64>,
}

/// Time-stamped nodal fields of one solve.
#[derive(Debug, Clone)]
pub struct SolutionSeries {
    pub problem: ProblemKind,
    pub domain: DomainSpec,
    pub nonlinearity: Nonlinearity,
    pub grid: GridSpec,
    pub snapshots: Vec<Snapshot>,
    pub stats: SolverStats,
}

impl SolutionSeries {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Snapshot at a scheduled time (relative match 1e-12).
    pub fn snapshot(&self, t: f64) -> Result<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(s.t.abs()))
            .ok_or_else(|| Error::Schedule(format!("t = {t:e} is not a scheduled time {:?}", self.times())))
    }
}

pub fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Schedule("schedule is empty".into()));
    }
    for (k, &t) in schedule.iter().enumerate() {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Schedule(format!("schedule[{k}] must be > 0, got {t}")));
        }
        if k > 0 && !(t > schedule[k - 1]) {
            return Err(Error::Schedule(format!("schedule[{k}] = {t} is not above schedule[{}]", k - 1)));
        }
    }
    Ok(())
}

pub fn solve_ibvp(domain: &DomainSpec, n: &Nonlinearity, grid: &GridSpec, schedule: &[f64]) -> Result<SolutionSeries> {
    solve(
        ProblemKind::Ibvp,
        domain,
        n,
        grid,
        schedule,
        &Stepping::for_spacing(grid.max_spacing()),
        &SolverOptions::default(),
    )
}

pub fn solve_cauchy(domain: &DomainSpec, n: &Nonlinearity, grid: &GridSpec, schedule: &[f64]) -> Result<SolutionSeries> {
    solve(
        ProblemKind::Cauchy,
        domain,
        n,
        grid,
        schedule,
        &Stepping::for_spacing(grid.max_spacing()),
        &SolverOptions::default(),
    )
}

/// Sub-sampled fraction of the cell-sized box around each node lying outside `domain`.
fn rasterize_complement(domain: &DomainSpec, grid: &GridSpec, m: usize) -> Vec<f64> {
    use rayon::prelude::*;
    let dim = grid.dim();
    let offsets: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64 - 0.5).collect();
    let total = m.pow(dim as u32);
    (0..grid.node_count())
        .into_par_iter()
        .map(|i| {
            let x = grid.coord(i);
            let mut out = 0usize;
            for s in 0..total {
                let mut p = x;
                let mut rem = s;
                for a in 0..dim {
                    p[a] += offsets[rem % m] * grid.spacing[a];
                    rem /= m;
                }
                if !domain.contains(&p) {
                    out += 1;
                }
            }
            out as f64 / total as f64
        })
        .collect()
}

/// Solves either problem, storing the full grid field at every scheduled time.
/// IBVP fields hold 1 at nodes outside the domain.
pub fn solve(
    problem: ProblemKind,
    domain: &DomainSpec,
    n: &Nonlinearity,
    grid: &GridSpec,
    schedule: &[f64],
    stepping: &Stepping,
    opts: &SolverOptions,
) -> Result<SolutionSeries> {
    let clock = Instant::now();
    grid.validate()?;
    validate_schedule(schedule)?;
    stepping.validate()?;
    if grid.dim() != domain.dim() {
        return Err(Error::Config(format!(
            "grid dimension {} does not match domain dimension {}",
            grid.dim(),
            domain.dim()
        )));
    }
    let t_max = *schedule.last().unwrap();
    let bounds = domain.boundary_bounds();
    let (glo, ghi) = (grid.lower(), grid.upper());
    let needed = match problem {
        ProblemKind::Ibvp => 0.0,
        ProblemKind::Cauchy => 4.0 * (n.delta2() * t_max).sqrt(),
    };
    if let Some((lo, hi)) = bounds {
        for a in 0..grid.dim() {
            let short = lo[a] - glo[a] < needed - 1e-12 || ghi[a] - hi[a] < needed - 1e-12;
            let uncovered = lo[a] < glo[a] - 1e-12 || hi[a] > ghi[a] + 1e-12;
            if uncovered && problem == ProblemKind::Ibvp {
                return Err(Error::Coverage(format!(
                    "axis {a}: boundary spans [{}, {}] but grid spans [{}, {}]",
                    lo[a], hi[a], glo[a], ghi[a]
                )));
            }
            if short {
                return Err(Error::Config(format!(
                    "axis {a}: far-field margin must be >= 4 sqrt(delta2 t_max) = {needed:.4}, grid spans \
                     [{}, {}] around a boundary in [{}, {}]",
                    glo[a], ghi[a], lo[a], hi[a]
                )));
            }
        }
    }
    let count = grid.node_count();
    let (initial, unknown, cut_domain): (Vec<f64>, Vec<bool>, Option<&DomainSpec>) = match problem {
        ProblemKind::Ibvp => {
            let inside: Vec<bool> = (0..count).map(|i| domain.contains(&grid.coord(i))).collect();
            let init = inside.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect();
            let unknown = (0..count).map(|i| inside[i] && !grid.is_edge_node(i)).collect();
            (init, unknown, Some(domain))
        }
        ProblemKind::Cauchy => {
            let init = rasterize_complement(domain, grid, opts.subsamples.max(1));
            let unknown = (0..count).map(|i| !grid.is_edge_node(i)).collect();
            (init, unknown, None)
        }
    };
    let op = Operator::assemble(grid, n, &unknown, &initial, cut_domain, opts.theta_min);
    let layout = SweepLayout::new(grid, &op);
    let mut stats = SolverStats {
        unknowns: op.len(),
        ..Default::default()
    };
    log::debug!("{} solve: {} unknowns, {} links", problem.as_str(), op.len(), op.links);
    let mut u: Vec<f64> = op.nodes.iter().map(|&i| initial[i]).collect();
    let mut u_old = u.clone();
    let mut snapshots = Vec::with_capacity(schedule.len());
    let mut t = 0.0;
    let mut dt = stepping.dt_initial;
    for &target in schedule {
        while t < target {
            let remaining = target - t;
            let step = if remaining <= dt {
                remaining
            } else if remaining < 1.25 * dt {
                0.5 * remaining
            } else {
                dt
            };
            u_old.copy_from_slice(&u);
            newton_step(&op, n, &u_old, &mut u, step, t + step, opts, &mut stats)?;
            if opts.tail_polish {
                polish_tail(&op, &layout, n, &u_old, &mut u, step, opts, &mut stats);
            }
            for v in u.iter_mut() {
                let excess = (*v - 1.0).max(-*v);
                if excess > 0.0 {
                    if excess > 1e-12 {
                        stats.range_violations += 1;
                        stats.max_range_violation = stats.max_range_violation.max(excess);
                    }
                    *v = v.clamp(0.0, 1.0);
                }
            }
            t = if step == remaining { target } else { t + step };
            stats.steps += 1;
            dt = (dt * stepping.growth).min(stepping.dt_max);
        }
        let mut field = initial.clone();
        for (r, &i) in op.nodes.iter().enumerate() {
            field[i] = u[r];
        }
        snapshots.push(Snapshot { t: target, field });
    }
    stats.seconds = clock.elapsed().as_secs_f64();
    Ok(SolutionSeries {
        problem,
        domain: domain.clone(),
        nonlinearity: n.clone(),
        grid: grid.clone(),
        snapshots,
        stats,
    })
}

/// Multilinear interpolation of the snapshot at exactly the scheduled time `t`.
pub fn probe(series: &SolutionSeries, x: &Point, t: f64) -> Result<f64> {
    let snap = series.snapshot(t)?;
    series
        .grid
        .interpolate(&snap.field, x)
        .ok_or_else(|| Error::Geometry(format!("probe point {x:?} lies outside the grid")))
}

/// Integral of the multilinear interpolant of `u(., t)` over `B_R(x0)`.
///
/// Cells inside the ball contribute their exact corner average; cells cut by
/// the sphere are sampled at `4^N` sub-cell midpoints.
pub fn heat_content(series: &SolutionSeries, x0: &Point, r: f64, t: f64) -> Result<f64> {
    let snap = series.snapshot(t)?;
    integrate_over_ball(&series.grid, &snap.field, x0, r)
}

pub fn integrate_over_ball(grid: &GridSpec, field: &[f64], x0: &Point, r: f64) -> Result<f64> {
    let dim = grid.dim();
    let (glo, ghi) = (grid.lower(), grid.upper());
    for a in 0..dim {
        if x0[a] - r < glo[a] - 1e-12 || x0[a] + r > ghi[a] + 1e-12 {
            return Err(Error::Geometry(format!("ball of radius {r} at {x0:?} leaves the grid")));
        }
    }
    let mut lo_cell = [0usize; 3];
    let mut hi_cell = [1usize; 3];
    for a in 0..dim {
        let h = grid.spacing[a];
        lo_cell[a] = (((x0[a] - r - grid.origin[a]) / h).floor().max(0.0)) as usize;
        hi_cell[a] = ((((x0[a] + r - grid.origin[a]) / h).ceil()) as usize).min(grid.extents[a]);
    }
    let corners = 1usize << dim;
    let m = 4usize;
    let sub_total = m.pow(dim as u32);
    let cell_volume = grid.cell_volume();
    let mut total = 0.0;
    for k in lo_cell[2]..hi_cell[2] {
        for j in lo_cell[1]..hi_cell[1] {
            for i in lo_cell[0]..hi_cell[0] {
                let base = [i, j, k];
                let mut vals = [0.0; 8];
                let mut inside = 0;
                let mut nearest: f64 = 0.0;
                for c in 0..corners {
                    let mut ijk = base;
                    for a in 0..dim {
                        ijk[a] += (c >> a) & 1;
                    }
                    vals[c] = field[grid.index(ijk)];
                    let d = dist(&grid.coord_of(ijk), x0);
                    if d <= r {
                        inside += 1;
                    }
                    nearest = if c == 0 { d } else { nearest.min(d) };
                }
                if inside == corners {
                    total += cell_volume * vals[..corners].iter().sum::<f64>() / corners as f64;
                    continue;
                }
                // a cell with no corner inside can still be clipped by the sphere
                let cell_center = {
                    let mut p = grid.coord_of(base);
                    for a in 0..dim {
                        p[a] += 0.5 * grid.spacing[a];
                    }
                    p
                };
                let half_diag = 0.5 * (0..dim).map(|a| grid.spacing[a].powi(2)).sum::<f64>().sqrt();
                if dist(&cell_center, x0) > r + half_diag {
                    continue;
                }
                let mut acc = 0.0;
                for s in 0..sub_total {
                    let mut rem = s;
                    let mut frac = [0.0; 3];
                    let mut p = grid.coord_of(base);
                    for a in 0..dim {
                        frac[a] = ((rem % m) as f64 + 0.5) / m as f64;
                        p[a] += frac[a] * grid.spacing[a];
                        rem /= m;
                    }
                    if dist(&p, x0) > r {
                        continue;
                    }
                    let mut v = 0.0;
                    for c in 0..corners {
                        let mut w = 1.0;
                        for a in 0..dim {
                            w *= if (c >> a) & 1 == 1 { frac[a] } else { 1.0 - frac[a] };
                        }
                        v += w * vals[c];
                    }
                    acc += v;
                }
                total += cell_volume * acc / sub_total as f64;
            }
        }
    }
    Ok(total)
}
