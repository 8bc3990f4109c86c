use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SurfaceSample;
use crate::solver::{probe, SolutionSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub t: f64,
    /// `a(t)`: mean of `u` over the surface samples.
    pub mean: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryLevelReport {
    pub surface_id: String,
    pub samples: usize,
    pub dropped: usize,
    pub levels: Vec<LevelStat>,
    /// False when more than 10% of samples could not be probed.
    pub valid: bool,
    pub verdict: bool,
    pub recovered_radius: Option<f64>,
    pub warnings: Vec<String>,
}

/// Tests `u(x, t) = a(t)` on the samples at each listed time: the verdict
/// holds when `max |u - a(t)| <= rel_tol a(t) + abs_tol` at every time.
pub fn stationary_surface_test(
    series: &SolutionSeries,
    gamma: &[SurfaceSample],
    t_list: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<StationaryLevelReport> {
    if gamma.is_empty() {
        return Err(Error::Config("stationary surface test needs at least one sample".into()));
    }
    if t_list.is_empty() {
        return Err(Error::Config("stationary surface test needs at least one time".into()));
    }
    for &t in t_list {
        series.snapshot(t)?;
    }
    let mut warnings = Vec::new();
    let mut keep = Vec::new();
    for s in gamma {
        let ok = series.domain.level(&s.point) > 0.0 && t_list.iter().all(|&t| probe(series, &s.point, t).is_ok());
        if ok {
            keep.push(s);
        } else {
            let msg = format!("sample at {:?} dropped: outside the domain or the grid", s.point);
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    let dropped = gamma.len() - keep.len();
    let valid = dropped * 10 <= gamma.len() && !keep.is_empty();
    let mut levels = Vec::new();
    for &t in t_list {
        if keep.is_empty() {
            break;
        }
        let vals: Vec<f64> = keep.iter().map(|s| probe(series, &s.point, t)).collect::<Result<_>>()?;
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let dev = vals.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
        levels.push(LevelStat {
            t,
            mean,
            max_deviation: dev,
            tolerance: rel_tol * mean + abs_tol,
        });
    }
    let verdict = valid && levels.iter().all(|l| l.max_deviation <= l.tolerance);
    Ok(StationaryLevelReport {
        surface_id: gamma[0].surface_id.clone(),
        samples: gamma.len(),
        dropped,
        levels,
        valid,
        verdict,
        recovered_radius: None,
        warnings,
    })
}
