//! Consequences of a stationary surface: constant distance to the
//! boundary, the parallel-body identity, curvature transfer and the
//! Monge–Ampère type constancy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    axpy, parallel_body, principal_curvatures_tol, scale, DomainSpec, SignedDistanceField, SurfaceSample,
};
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantDistance {
    pub is_constant: bool,
    /// Mean of `d` over the samples.
    pub radius: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
}

/// `R` = mean of `d` over `gamma`; constant when `max |d - R| <= 3h`.
pub fn constant_distance_test(sdf: &SignedDistanceField, gamma: &[SurfaceSample]) -> Result<ConstantDistance> {
    if gamma.is_empty() {
        return Err(Error::Config("constant distance test needs at least one sample".into()));
    }
    let d: Vec<f64> = gamma.iter().map(|s| sdf.value(&s.point)).collect();
    let radius = d.iter().sum::<f64>() / d.len() as f64;
    let max_deviation = d.iter().fold(0.0f64, |m, v| m.max((v - radius).abs()));
    let tolerance = 3.0 * sdf.grid.max_spacing();
    Ok(ConstantDistance {
        is_constant: max_deviation <= tolerance,
        radius,
        max_deviation,
        tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub radius: f64,
    pub compared: usize,
    pub disagreeing: usize,
    pub disagreement_fraction: f64,
    pub collar: f64,
}

/// Compares membership in the `R`-parallel body of `D` with membership in
/// `omega` on the probe grid, ignoring nodes within `2h` of either boundary.
pub fn reconstruct_domain(d: &DomainSpec, r: f64, omega: &DomainSpec, probe: &GridSpec) -> Result<ReconstructionReport> {
    if d.dim() != omega.dim() || probe.dim() != omega.dim() {
        return Err(Error::Config("domains and probe grid must share a dimension".into()));
    }
    let body = parallel_body(d, r)?;
    let collar = 2.0 * probe.max_spacing();
    let (mut compared, mut disagreeing) = (0, 0);
    for i in 0..probe.node_count() {
        let x = probe.coord(i);
        let (a, b) = (body.level(&x), omega.level(&x));
        if a.abs() <= collar || b.abs() <= collar {
            continue;
        }
        compared += 1;
        if (a > 0.0) != (b > 0.0) {
            disagreeing += 1;
        }
    }
    Ok(ReconstructionReport {
        radius: r,
        compared,
        disagreeing,
        disagreement_fraction: if compared > 0 { disagreeing as f64 / compared as f64 } else { 0.0 },
        collar,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub radius: f64,
    /// Per sample, the largest `|kappa_j(xi) + khat_j / (1 - R khat_j)|`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// The points `xi(x) = x + R nu(x)` on the boundary of `omega`, with
    /// curvatures measured there.
    #[serde(skip, default)]
    pub transferred: Vec<SurfaceSample>,
}

/// Curvature transfer from `gamma` (samples of the boundary of `D`, normals
/// into `D`) to the boundary of `omega` along the outward normal `nu` of `D`.
///
/// Signs: `khat_j` are the curvatures of `gamma` with respect to `nu`, i.e.
/// minus the sample curvatures; `kappa_j(xi)` are taken with respect to the
/// inward normal of `omega`. For a disk of radius `r0` inside a concentric
/// disk of radius `r0 + R`, `khat = -1/r0` and `kappa = 1/(r0 + R)`.
pub fn curvature_transfer_check(
    omega: &DomainSpec,
    gamma: &[SurfaceSample],
    r: f64,
    tol: f64,
) -> Result<TransferReport> {
    let mut residuals = Vec::with_capacity(gamma.len());
    let mut transferred = Vec::with_capacity(gamma.len());
    for (index, s) in gamma.iter().enumerate() {
        let khat: Vec<f64> = s.curvatures.iter().map(|k| -k).collect();
        let mut predicted = Vec::with_capacity(khat.len());
        for &k in &khat {
            let den = 1.0 - r * k;
            if den <= 1e-9 {
                return Err(Error::TransferUndefined {
                    index,
                    kappa: k,
                    inverse_radius: 1.0 / r,
                });
            }
            predicted.push(-k / den);
        }
        predicted.sort_by(f64::total_cmp);
        let nu = scale(&s.inward_normal, -1.0);
        let xi = axpy(&s.point, r, &nu);
        let measured = principal_curvatures_tol(omega, &xi, tol.max(1e-9))?;
        let res = measured
            .curvatures
            .iter()
            .zip(&predicted)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        residuals.push(res);
        transferred.push(measured.relabel(&format!("transfer:{}", s.surface_id)));
    }
    let max_residual = residuals.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(TransferReport {
        radius: r,
        residuals,
        max_residual,
        tolerance: tol,
        pass: max_residual <= tol,
        transferred,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MongeAmpereReport {
    pub values: Vec<f64>,
    /// `(max - min) / |mean|`.
    pub spread: f64,
    pub tolerance: f64,
    pub is_constant: bool,
    /// Mean of the products.
    pub c: f64,
}

/// Per-sample `prod_j (1/R - kappa_j)` over boundary samples of `omega`
/// (curvatures with respect to its inward normal); constant when the
/// relative spread is at most `20h`.
pub fn monge_ampere_test(samples: &[SurfaceSample], r: f64, h: f64) -> Result<MongeAmpereReport> {
    if samples.is_empty() {
        return Err(Error::Config("Monge-Ampere test needs at least one sample".into()));
    }
    let inv = 1.0 / r;
    let mut values = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if let Some(&k) = s.curvatures.iter().find(|&&k| !(k < inv)) {
            return Err(Error::Precondition(format!(
                "sample {i} at {:?}: curvature {k} is not below 1/R = {inv}",
                s.point
            )));
        }
        values.push(s.curvatures.iter().map(|k| inv - k).product::<f64>());
    }
    let c = values.iter().sum::<f64>() / values.len() as f64;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = (hi - lo) / c.abs();
    let tolerance = 20.0 * h;
    Ok(MongeAmpereReport {
        is_constant: spread <= tolerance,
        values,
        spread,
        tolerance,
        c,
    })
}
