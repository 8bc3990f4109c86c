//! Self-similar barriers built on `F(xi) = erfc(xi / 2) / 2`: the shifted
//! profiles `F+-`, the fields `v+-` and `w+-`, the time threshold below which
//! `v+-` are sub- and supersolutions near the boundary, and checks of both
//! properties against grid data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::geometry::SignedDistanceField;
use crate::grid::GridSpec;
use crate::serde_util::extended_f64;
use crate::solver::{ProblemKind, SolutionSeries};

pub fn profile_f(xi: f64) -> f64 {
    0.5 * erfc(0.5 * xi)
}

/// `F'(xi) = -exp(-xi^2 / 4) / (2 sqrt(pi))`.
pub fn profile_f_prime(xi: f64) -> f64 {
    -(-0.25 * xi * xi).exp() / (2.0 * PI.sqrt())
}

/// `F+(xi) = F(xi - 2 eps)` for `sign > 0`, `F-(xi) = F(xi + 2 eps)` otherwise.
pub fn profile_f_pm(xi: f64, eps: f64, sign: f64) -> f64 {
    profile_f(xi - sign.signum() * 2.0 * eps)
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.25 {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must lie in (0, 1/4), got {eps}")))
    }
}

fn band_of(sdf: &SignedDistanceField) -> Result<f64> {
    sdf.band
        .ok_or_else(|| Error::Precondition("signed distance field has no tubular band set".into()))
}

/// Nodes with `|d*| <= rho0` whose whole Laplacian stencil also lies in the band.
fn band_interior_nodes(sdf: &SignedDistanceField, rho0: f64) -> Vec<usize> {
    let g = &sdf.grid;
    (0..g.node_count())
        .filter(|&i| {
            sdf.values[i].abs() <= rho0
                && !g.is_edge_node(i)
                && g.neighbors(i).iter().flatten().all(|&j| sdf.values[j].abs() <= rho0)
        })
        .collect()
}

/// `(eps / 2M)^2` with `M` the largest discrete `|Laplacian d*|` over the
/// band `{|d*| <= rho0}`; infinite when the boundary is flat.
pub fn t1_epsilon(sdf: &SignedDistanceField, eps: f64) -> Result<f64> {
    check_epsilon(eps)?;
    let rho0 = band_of(sdf)?;
    let nodes = band_interior_nodes(sdf, rho0);
    if nodes.is_empty() {
        return Err(Error::Resolution(format!(
            "no grid node has its Laplacian stencil inside the band of half-width {rho0}"
        )));
    }
    let m = nodes
        .iter()
        .filter_map(|&i| sdf.laplacian(i))
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if m <= 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok((eps / (2.0 * m)).powi(2))
}

/// Nodal `v+- = F+-(d* / sqrt t)`.
pub fn barrier_fields(sdf: &SignedDistanceField, eps: f64, t: f64, sign: f64) -> Vec<f64> {
    let s = t.sqrt();
    sdf.values.iter().map(|d| profile_f_pm(d / s, eps, sign)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubSuperRung {
    pub t: f64,
    /// Smallest `+{(v+)_t - Laplacian v+}` over band nodes.
    pub min_residual_plus: f64,
    /// Smallest `-{(v-)_t - Laplacian v-}` over band nodes.
    pub min_residual_minus: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubSuperReport {
    pub epsilon: f64,
    #[serde(with = "extended_f64")]
    pub t1_epsilon: f64,
    pub slack: f64,
    pub band_nodes: usize,
    pub rungs: Vec<SubSuperRung>,
    pub pass: bool,
}

/// Finite-difference residual signs of `v+-` on the band; each rung passes
/// when both minima exceed `-10 h`.
pub fn check_subsuper(sdf: &SignedDistanceField, eps: f64, t_ladder: &[f64]) -> Result<SubSuperReport> {
    let t1 = t1_epsilon(sdf, eps)?;
    if let Some(&bad) = t_ladder.iter().find(|&&t| !(t > 0.0) || t > t1 * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "t = {bad:e} exceeds the sub/supersolution threshold t1 = {t1:e}"
        )));
    }
    let rho0 = band_of(sdf)?;
    let nodes = band_interior_nodes(sdf, rho0);
    let g = &sdf.grid;
    let slack = 10.0 * g.max_spacing();
    let lap = |v: &[f64], i: usize| -> f64 {
        let nb = g.neighbors(i);
        (0..g.dim())
            .map(|a| {
                let h = g.spacing[a];
                (v[nb[2 * a].unwrap()] - 2.0 * v[i] + v[nb[2 * a + 1].unwrap()]) / (h * h)
            })
            .sum()
    };
    let mut rungs = Vec::new();
    for &t in t_ladder {
        let dt = 1e-4 * t;
        let mut mins = [f64::INFINITY; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let v = barrier_fields(sdf, eps, t, sign);
            let vp = barrier_fields(sdf, eps, t + dt, sign);
            let vm = barrier_fields(sdf, eps, t - dt, sign);
            for &i in &nodes {
                let vt = (vp[i] - vm[i]) / (2.0 * dt);
                mins[k] = mins[k].min(sign * (vt - lap(&v, i)));
            }
        }
        rungs.push(SubSuperRung {
            t,
            min_residual_plus: mins[0],
            min_residual_minus: mins[1],
            pass: mins[0] > -slack && mins[1] > -slack,
        });
    }
    Ok(SubSuperReport {
        epsilon: eps,
        t1_epsilon: t1,
        slack,
        band_nodes: nodes.len(),
        pass: rungs.iter().all(|r| r.pass),
        rungs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierConfig {
    pub epsilon: f64,
    pub e1: f64,
    pub e2: f64,
    pub problem: ProblemKind,
    pub rho0: f64,
    pub rho1: f64,
}

impl BarrierConfig {
    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if !(self.e1 > 0.0 && self.e2 > 0.0 && self.rho0 > 0.0 && self.rho1 >= self.rho0) {
            return Err(Error::Config(format!(
                "barrier constants need E1, E2, rho0 > 0 and rho1 >= rho0, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierFit {
    pub config: BarrierConfig,
    /// Largest scheduled time with the distance law within `rho0^2 / 2` off the band.
    #[serde(with = "extended_f64")]
    pub t0: f64,
    #[serde(with = "extended_f64")]
    pub t1_epsilon: f64,
    /// `min(t0, t1_epsilon)`.
    #[serde(with = "extended_f64")]
    pub t_epsilon: f64,
    /// Per scheduled time, the largest `|4 t log u + d*^2|` off the band.
    #[serde(with = "crate::serde_util::extended_f64_vec")]
    pub varadhan_deviation: Vec<f64>,
    pub verified_times: Vec<f64>,
}

/// Nodes of the closed set `{0 <= d* <= rho1}`.
fn envelope_region(sdf: &SignedDistanceField, rho1: f64) -> impl Iterator<Item = usize> + '_ {
    (0..sdf.values.len()).filter(move |&i| sdf.values[i] >= 0.0 && sdf.values[i] <= rho1)
}

/// Fits the envelope constants from a heat-equation solve.
///
/// `E2 = rho0^2 / 8`; `rho1 = max(2R, rho0)`; `t0` is the largest scheduled
/// time at which `|4 t log u + d*^2| < rho0^2 / 2` on `{rho0 < d* <= rho1}`
/// (nodes with `u = 0` skipped); `E1` is twice the largest
/// `max(u, v+, v-) e^{E2/t}` on that set over scheduled times up to
/// `min(t0, t1_epsilon)`.
pub fn fit_barrier_constants(
    series: &SolutionSeries,
    sdf: &SignedDistanceField,
    eps: f64,
    radius: f64,
) -> Result<BarrierFit> {
    check_epsilon(eps)?;
    if series.grid != sdf.grid {
        return Err(Error::Config("solution and distance field use different grids".into()));
    }
    let rho0 = band_of(sdf)?;
    let rho1 = (2.0 * radius).max(rho0);
    let e2 = rho0 * rho0 / 8.0;
    let t1 = t1_epsilon(sdf, eps)?;
    let outer: Vec<usize> = (0..sdf.values.len())
        .filter(|&i| sdf.values[i] > rho0 && sdf.values[i] <= rho1)
        .collect();
    let mut deviation = Vec::new();
    let mut t0 = 0.0f64;
    for snap in &series.snapshots {
        let t = snap.t;
        let dev = outer
            .iter()
            .filter(|&&i| snap.field[i] > 0.0)
            .map(|&i| (4.0 * t * snap.field[i].ln() + sdf.values[i].powi(2)).abs())
            .fold(0.0f64, f64::max);
        deviation.push(dev);
        if dev < 0.5 * rho0 * rho0 {
            t0 = t0.max(t);
        }
    }
    let t_eps = t0.min(t1);
    let verified: Vec<f64> = series.times().into_iter().filter(|&t| t <= t_eps).collect();
    let mut e1 = 0.0f64;
    for snap in series.snapshots.iter().filter(|s| s.t <= t_eps) {
        let s = snap.t.sqrt();
        let scale = (e2 / snap.t).exp();
        for &i in &outer {
            let xi = sdf.values[i] / s;
            let m = snap.field[i]
                .max(profile_f_pm(xi, eps, 1.0))
                .max(profile_f_pm(xi, eps, -1.0));
            e1 = e1.max(m * scale);
        }
    }
    let e1 = if e1 > 0.0 { 2.0 * e1 } else { f64::MIN_POSITIVE };
    Ok(BarrierFit {
        config: BarrierConfig {
            epsilon: eps,
            e1,
            e2,
            problem: series.problem,
            rho0,
            rho1,
        },
        t0,
        t1_epsilon: t1,
        t_epsilon: t_eps,
        varadhan_deviation: deviation,
        verified_times: verified,
    })
}

/// `(w-, w+)`: `2 v+- +- 2 E1 e^{-E2/t}` for the boundary problem and
/// `(1 +- eps) v+- +- 2 E1 e^{-E2/t}` for the Cauchy problem.
pub fn envelope_w(sdf: &SignedDistanceField, cfg: &BarrierConfig, t: f64) -> (Vec<f64>, Vec<f64>) {
    let corr = 2.0 * cfg.e1 * (-cfg.e2 / t).exp();
    let (fm, fp) = match cfg.problem {
        ProblemKind::Ibvp => (2.0, 2.0),
        ProblemKind::Cauchy => (1.0 - cfg.epsilon, 1.0 + cfg.epsilon),
    };
    let vm = barrier_fields(sdf, cfg.epsilon, t, -1.0);
    let vp = barrier_fields(sdf, cfg.epsilon, t, 1.0);
    (
        vm.iter().map(|v| fm * v - corr).collect(),
        vp.iter().map(|v| fp * v + corr).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeStats {
    pub t: f64,
    pub nodes: usize,
    pub below: usize,
    pub above: usize,
    pub violation_fraction: f64,
    /// Largest `w- - u` and `u - w+` (negative when satisfied everywhere).
    pub worst_lower: f64,
    pub worst_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub config: BarrierConfig,
    pub tolerance: f64,
    pub snapshots: Vec<EnvelopeStats>,
    pub pass: bool,
}

/// Counts nodes of `{0 <= d* <= rho1}` with `u` outside `[w- - tol, w+ + tol]`.
pub fn envelope_stats(
    grid: &GridSpec,
    field: &[f64],
    sdf: &SignedDistanceField,
    cfg: &BarrierConfig,
    t: f64,
    tol: f64,
) -> Result<EnvelopeStats> {
    if *grid != sdf.grid || field.len() != sdf.values.len() {
        return Err(Error::Config("field and distance field use different grids".into()));
    }
    let (wm, wp) = envelope_w(sdf, cfg, t);
    let mut s = EnvelopeStats {
        t,
        nodes: 0,
        below: 0,
        above: 0,
        violation_fraction: 0.0,
        worst_lower: f64::NEG_INFINITY,
        worst_upper: f64::NEG_INFINITY,
    };
    for i in envelope_region(sdf, cfg.rho1) {
        s.nodes += 1;
        s.worst_lower = s.worst_lower.max(wm[i] - field[i]);
        s.worst_upper = s.worst_upper.max(field[i] - wp[i]);
        if field[i] < wm[i] - tol {
            s.below += 1;
        }
        if field[i] > wp[i] + tol {
            s.above += 1;
        }
    }
    if s.nodes > 0 {
        s.violation_fraction = (s.below + s.above) as f64 / s.nodes as f64;
    }
    Ok(s)
}

/// Envelope check with tolerance `10 h` at the given scheduled times.
pub fn check_envelope(
    series: &SolutionSeries,
    sdf: &SignedDistanceField,
    cfg: &BarrierConfig,
    times: &[f64],
) -> Result<EnvelopeReport> {
    cfg.validate()?;
    if cfg.problem != series.problem {
        return Err(Error::Config(format!(
            "barrier constants are for the {} problem but the series solves the {} problem",
            cfg.problem.as_str(),
            series.problem.as_str()
        )));
    }
    let tol = 10.0 * series.grid.max_spacing();
    let snapshots = times
        .iter()
        .map(|&t| envelope_stats(&series.grid, &series.snapshot(t)?.field, sdf, cfg, t, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnvelopeReport {
        config: cfg.clone(),
        tolerance: tol,
        pass: snapshots.iter().all(|s| s.below + s.above == 0),
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_signed_distance, DomainSpec};

    #[test]
    fn profile_values() {
        assert_eq!(profile_f(0.0), 0.5);
        assert!(profile_f(-20.0) > 1.0 - 1e-12);
        assert!(profile_f(20.0) < 1e-12);
        let h = 1e-3;
        for xi in [-2.0, 0.0, 2.0] {
            let f2 = (profile_f(xi + h) - 2.0 * profile_f(xi) + profile_f(xi - h)) / (h * h);
            let f1 = (profile_f(xi + h) - profile_f(xi - h)) / (2.0 * h);
            assert!((f2 + 0.5 * xi * f1).abs() < 1e-6);
            assert!((f1 - profile_f_prime(xi)).abs() < 1e-6);
        }
        assert!(profile_f_pm(0.0, 0.1, 1.0) > 0.5 && profile_f_pm(0.0, 0.1, -1.0) < 0.5);
    }

    fn disk_sdf(h: f64, band: f64) -> SignedDistanceField {
        let d = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let g = GridSpec::covering(&[-1.0, -1.0], &[1.0, 1.0], h, 0.3).unwrap();
        build_signed_distance(&d, &g).unwrap().with_band(band)
    }

    #[test]
    fn disk_threshold_and_scaling() {
        let sdf = disk_sdf(1.0 / 128.0, 0.25);
        let t1 = t1_epsilon(&sdf, 0.1).unwrap();
        // |Laplacian d*| = 1/r peaks at r = 0.75
        let exact = (0.1f64 / (2.0 * 4.0 / 3.0)).powi(2);
        assert!((t1 - exact).abs() / exact < 0.05, "{t1} vs {exact}");
        let t2 = t1_epsilon(&sdf, 0.2).unwrap();
        assert!((t2 / t1 - 4.0).abs() < 1e-12);
        assert!(matches!(t1_epsilon(&sdf, 0.3), Err(Error::Domain(_))));
    }

    #[test]
    fn flat_boundary_has_no_threshold() {
        let d = DomainSpec::half_space(&[1.0], 0.0).unwrap();
        let g = GridSpec::covering(&[-1.0], &[1.0], 1.0 / 64.0, 0.0).unwrap();
        let sdf = build_signed_distance(&d, &g).unwrap().with_band(0.5);
        assert_eq!(t1_epsilon(&sdf, 0.1).unwrap(), f64::INFINITY);
        let r = check_subsuper(&sdf, 0.1, &[1e-3, 1e-2]).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn subsuper_on_the_disk() {
        let sdf = disk_sdf(1.0 / 256.0, 0.25);
        let t1 = t1_epsilon(&sdf, 0.1).unwrap();
        assert!(check_subsuper(&sdf, 0.1, &[0.5 * t1]).unwrap().pass);
        assert!(matches!(
            check_subsuper(&sdf, 0.1, &[100.0 * t1]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn envelope_inversion() {
        let sdf = disk_sdf(1.0 / 64.0, 0.25);
        let cfg = BarrierConfig {
            epsilon: 0.1,
            e1: 1.0,
            e2: 0.25f64.powi(2) / 8.0,
            problem: ProblemKind::Ibvp,
            rho0: 0.25,
            rho1: 1.0,
        };
        let t = 1e-3;
        let (wm, wp) = envelope_w(&sdf, &cfg, t);
        assert!(wm.iter().zip(&wp).all(|(a, b)| b - a >= 4.0 * cfg.e1 * (-cfg.e2 / t).exp() - 1e-15));
        let s = envelope_stats(&sdf.grid, &wp, &sdf, &cfg, t, 0.0).unwrap();
        assert_eq!(s.above, 0);
        let s = envelope_stats(&sdf.grid, &vec![0.0; wp.len()], &sdf, &cfg, t, 0.0).unwrap();
        assert!(s.below > 0);
    }
}
