//! Balance laws, stationary level surfaces and the chain of tests that
//! classifies the boundary of a domain admitting one.

mod balance;
mod characterize;
mod stationary;
mod symmetry;

pub use balance::{
    difference_mean_balance, mean_balance, mean_of_field, moment_balance, moment_of_field, sphere_integral,
    SPHERE_NODES,
};
pub use characterize::{
    constant_distance_test, curvature_transfer_check, monge_ampere_test, reconstruct_domain, ConstantDistance,
    MongeAmpereReport, ReconstructionReport, TransferReport,
};
pub use stationary::{stationary_surface_test, LevelStat, StationaryLevelReport};
pub use symmetry::{
    boundary_components, default_directions, fit_sphere, moving_plane_scan, Classification, DirectionScan,
    SphereFit, SymmetryVerdict,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{DomainSpec, Point, SignedDistanceField, SurfaceSample};
use crate::grid::GridSpec;
use crate::solver::SolutionSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub times: Vec<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Scan directions; the defaults of [`default_directions`] when empty.
    pub directions: Vec<Point>,
}

impl ClassifyOptions {
    pub fn new(times: &[f64]) -> Self {
        Self {
            times: times.to_vec(),
            rel_tol: 0.02,
            abs_tol: 1e-4,
            directions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classification: Classification,
    /// First stage that did not confirm the hypothesis, if any.
    pub failing_stage: Option<String>,
    pub stationary: StationaryLevelReport,
    pub constant_distance: Option<ConstantDistance>,
    pub reconstruction: Option<ReconstructionReport>,
    pub transfer: Option<TransferReport>,
    pub monge_ampere: Option<MongeAmpereReport>,
    pub symmetry: Option<SymmetryVerdict>,
}

impl ClassificationReport {
    fn stop(mut self, stage: &str) -> Self {
        self.classification = Classification::Inconclusive;
        self.failing_stage = Some(stage.to_string());
        self
    }
}

/// Runs the characterization chain for a candidate stationary surface
/// `gamma`, a component of the boundary of `D` nearest the boundary of
/// `omega`: stationarity, constant distance `R`, the parallel-body identity,
/// curvature transfer, Monge–Ampère constancy and the moving-plane scan of `D`.
///
/// Every "for all t" condition is checked on `opts.times` only.
pub fn classify_boundary(
    omega: &DomainSpec,
    d: &DomainSpec,
    gamma: &[SurfaceSample],
    series: &SolutionSeries,
    sdf: &SignedDistanceField,
    opts: &ClassifyOptions,
) -> Result<ClassificationReport> {
    let probe: &GridSpec = &series.grid;
    let h = probe.max_spacing();
    let stationary = stationary_surface_test(series, gamma, &opts.times, opts.rel_tol, opts.abs_tol)?;
    let mut rep = ClassificationReport {
        classification: Classification::Inconclusive,
        failing_stage: None,
        stationary,
        constant_distance: None,
        reconstruction: None,
        transfer: None,
        monge_ampere: None,
        symmetry: None,
    };
    if !rep.stationary.verdict {
        return Ok(rep.stop("stationary_surface"));
    }
    let cd = constant_distance_test(sdf, gamma)?;
    let r = cd.radius;
    let constant = cd.is_constant;
    rep.stationary.recovered_radius = constant.then_some(r);
    rep.constant_distance = Some(cd);
    if !constant {
        return Ok(rep.stop("constant_distance"));
    }
    let rec = reconstruct_domain(d, r, omega, probe)?;
    let agrees = rec.disagreeing == 0;
    rep.reconstruction = Some(rec);
    if !agrees {
        return Ok(rep.stop("reconstruction"));
    }
    let transfer = match curvature_transfer_check(omega, gamma, r, 10.0 * h) {
        Ok(t) => t,
        Err(_) => return Ok(rep.stop("curvature_transfer")),
    };
    let transferred = transfer.transferred.clone();
    let transfer_ok = transfer.pass;
    rep.transfer = Some(transfer);
    if !transfer_ok {
        return Ok(rep.stop("curvature_transfer"));
    }
    let ma = match monge_ampere_test(&transferred, r, h) {
        Ok(m) => m,
        Err(_) => return Ok(rep.stop("monge_ampere")),
    };
    let ma_ok = ma.is_constant;
    rep.monge_ampere = Some(ma);
    if !ma_ok {
        return Ok(rep.stop("monge_ampere"));
    }
    let dirs = if opts.directions.is_empty() {
        default_directions(d.dim())
    } else {
        opts.directions.clone()
    };
    let verdict = match moving_plane_scan(d, &dirs, probe) {
        Ok(v) => v,
        Err(_) => return Ok(rep.stop("moving_plane")),
    };
    rep.classification = verdict.classification;
    if !matches!(
        verdict.classification,
        Classification::Sphere | Classification::TwoConcentricSpheres
    ) {
        rep.failing_stage = Some("moving_plane".into());
    }
    rep.symmetry = Some(verdict);
    Ok(rep)
}
