use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, dot, normalize, reflect, reflection_containment, sample_boundary, DomainSpec, Point, Shape, SurfaceSample};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Sphere,
    TwoConcentricSpheres,
    Asymmetric,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionScan {
    pub direction: Point,
    /// Lowest plane position above which every tested reflection is contained.
    pub lambda_star: f64,
    pub ladder_len: usize,
    /// Containment holds on a prefix of the descending ladder and nowhere after.
    pub containment_monotone: bool,
    pub disagreement: usize,
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereFit {
    pub center: Point,
    pub radius: f64,
    /// Largest `| |x - c| - r |` over the component.
    pub residual: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryVerdict {
    pub directions: Vec<DirectionScan>,
    pub components: Vec<SphereFit>,
    pub center: Option<Point>,
    pub center_residual: f64,
    pub tolerance: f64,
    pub classification: Classification,
}

/// Default scan directions: 8 in the plane, or the 6 axis and 8 diagonal
/// directions in space.
pub fn default_directions(dim: usize) -> Vec<Point> {
    match dim {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..8)
            .map(|k| {
                let a = std::f64::consts::FRAC_PI_4 * k as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect(),
        _ => {
            let mut v = Vec::new();
            for a in 0..3 {
                for s in [1.0, -1.0] {
                    let mut p = [0.0; 3];
                    p[a] = s;
                    v.push(p);
                }
            }
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        v.push(normalize(&[sx, sy, sz]));
                    }
                }
            }
            v
        }
    }
}

/// Connected components of a sample cloud, linking samples closer than `link`.
pub fn boundary_components(samples: &[SurfaceSample], link: f64) -> Vec<Vec<usize>> {
    let n = samples.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let key = |x: &Point| {
        [
            (x[0] / link).floor() as i64,
            (x[1] / link).floor() as i64,
            (x[2] / link).floor() as i64,
        ]
    };
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        cells.entry(key(&s.point)).or_default().push(i);
    }
    for (i, s) in samples.iter().enumerate() {
        let k = key(&s.point);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(list) = cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else { continue };
                    for &j in list {
                        if j > i && dist(&s.point, &samples[j].point) <= link {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            if a != b {
                                parent[a.max(b)] = a.min(b);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let g = *slot.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Algebraic least-squares circle or sphere through the points.
pub fn fit_sphere(points: &[Point], dim: usize) -> Result<SphereFit> {
    if points.len() < dim + 1 {
        return Err(Error::Geometry(format!("sphere fit needs at least {} points", dim + 1)));
    }
    // |x|^2 = 2 c . x + k
    let a = DMatrix::from_fn(points.len(), dim + 1, |i, j| if j < dim { 2.0 * points[i][j] } else { 1.0 });
    let b = DVector::from_fn(points.len(), |i, _| dot(&points[i], &points[i]));
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Geometry(format!("sphere fit failed: {e}")))?;
    let mut center = [0.0; 3];
    for j in 0..dim {
        center[j] = sol[j];
    }
    let radius = (sol[dim] + dot(&center, &center)).max(0.0).sqrt();
    let residual = points.iter().fold(0.0f64, |m, p| m.max((dist(p, &center) - radius).abs()));
    Ok(SphereFit {
        center,
        radius,
        residual,
        samples: points.len(),
    })
}

fn scan_direction(d: &DomainSpec, l: &Point, lo: f64, hi: f64, probe: &GridSpec) -> Result<DirectionScan> {
    let h = probe.max_spacing();
    let step = 0.5 * h;
    let count = ((hi - lo) / step).ceil() as usize + 1;
    let ladder: Vec<f64> = (0..count).map(|k| hi - step * k as f64).collect();
    let flags: Vec<bool> = ladder.iter().map(|&lam| reflection_containment(d, l, lam, probe)).collect();
    let first_fail = flags.iter().position(|f| !f);
    let Some(ff) = first_fail.filter(|&k| k > 0) else {
        return Err(Error::Resolution(format!(
            "probe spacing {h} cannot bracket the critical plane for direction {l:?}"
        )));
    };
    let monotone = flags[ff..].iter().all(|f| !f);
    let (mut a, mut b) = (ladder[ff], ladder[ff - 1]);
    for _ in 0..6 {
        let m = 0.5 * (a + b);
        if reflection_containment(d, l, m, probe) {
            b = m;
        } else {
            a = m;
        }
    }
    let lambda_star = b;
    let collar = 2.0 * h;
    let disagreement = (0..probe.node_count())
        .filter(|&i| {
            let x = probe.coord(i);
            let (p, q) = (d.level(&x), d.level(&reflect(&x, l, lambda_star)));
            p.abs() > collar && q.abs() > collar && (p > 0.0) != (q > 0.0)
        })
        .count();
    Ok(DirectionScan {
        direction: *l,
        lambda_star,
        ladder_len: count,
        containment_monotone: monotone,
        disagreement,
        symmetric: disagreement == 0,
    })
}

fn bounded_part(d: &DomainSpec) -> &DomainSpec {
    match d.shape() {
        Shape::Complement { of } => of,
        _ => d,
    }
}

/// Moving-plane scan of `D` (of its bounded complement when `D` is an
/// exterior domain). A boundary with several components is classified by
/// fitting a sphere to each component instead.
pub fn moving_plane_scan(d: &DomainSpec, directions: &[Point], probe: &GridSpec) -> Result<SymmetryVerdict> {
    let body = bounded_part(d);
    let dim = body.dim();
    let h = probe.max_spacing();
    let tolerance = 3.0 * h;
    let density = 2.0 / h;
    let samples = sample_boundary(body, density)?;
    let comps = boundary_components(&samples, 4.0 / density);
    let mut verdict = SymmetryVerdict {
        directions: Vec::new(),
        components: Vec::new(),
        center: None,
        center_residual: f64::NAN,
        tolerance,
        classification: Classification::Inconclusive,
    };
    if comps.len() > 1 {
        for c in &comps {
            let pts: Vec<Point> = c.iter().map(|&i| samples[i].point).collect();
            verdict.components.push(fit_sphere(&pts, dim)?);
        }
        let fits = &verdict.components;
        let round = fits.iter().all(|f| f.residual <= tolerance);
        let spread = fits.iter().fold(0.0f64, |m, f| m.max(dist(&f.center, &fits[0].center)));
        verdict.center = Some(fits[0].center);
        verdict.center_residual = spread;
        verdict.classification = if round && spread <= tolerance && fits.len() == 2 {
            Classification::TwoConcentricSpheres
        } else {
            Classification::Asymmetric
        };
        return Ok(verdict);
    }
    let dirs: Vec<Point> = directions
        .iter()
        .map(|l| {
            let n = dot(l, l).sqrt();
            if n > 0.0 {
                Ok(normalize(l))
            } else {
                Err(Error::Config("scan direction must be nonzero".into()))
            }
        })
        .collect::<Result<_>>()?;
    verdict.directions = dirs
        .par_iter()
        .map(|l| {
            let proj = samples.iter().map(|s| dot(&s.point, l));
            let hi = proj.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = proj.fold(f64::INFINITY, f64::min);
            scan_direction(body, l, lo, hi, probe)
        })
        .collect::<Result<_>>()?;
    // least-squares common centre of the critical planes
    let m = DMatrix::from_fn(dirs.len(), dim, |i, j| dirs[i][j]);
    let b = DVector::from_iterator(dirs.len(), verdict.directions.iter().map(|s| s.lambda_star));
    let all_symmetric = verdict.directions.iter().all(|s| s.symmetric);
    if let Ok(c) = m.clone().svd(true, true).solve(&b, 1e-12) {
        let mut center = [0.0; 3];
        for j in 0..dim {
            center[j] = c[j];
        }
        let res = (&m * &c - &b).amax();
        verdict.center = Some(center);
        verdict.center_residual = res;
    }
    let rank_ok = m.rank(1e-9) == dim;
    verdict.classification = if all_symmetric && rank_ok && verdict.center_residual <= tolerance {
        Classification::Sphere
    } else {
        Classification::Asymmetric
    };
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(h: f64, half: f64) -> GridSpec {
        GridSpec::covering(&[-half, -half], &[half, half], h, 0.0).unwrap()
    }

    #[test]
    fn disk_is_a_sphere() {
        let h = 1.0 / 32.0;
        let d = DomainSpec::ball(&[0.1, -0.05], 0.6).unwrap();
        let v = moving_plane_scan(&d, &default_directions(2), &probe(h, 1.0)).unwrap();
        assert_eq!(v.classification, Classification::Sphere);
        let c = v.center.unwrap();
        assert!(dist(&c, &[0.1, -0.05, 0.0]) < h, "{c:?}");
        assert!(v.directions.iter().all(|s| s.containment_monotone));
    }

    #[test]
    fn ellipse_is_symmetric_about_its_axes_only() {
        let h = 1.0 / 32.0;
        let d = DomainSpec::ellipse(&[0.0, 0.0], &[1.0, 0.5]).unwrap();
        let v = moving_plane_scan(&d, &default_directions(2), &probe(h, 1.2)).unwrap();
        assert_eq!(v.classification, Classification::Asymmetric);
        for s in &v.directions {
            let axis = s.direction[0].abs() < 1e-9 || s.direction[1].abs() < 1e-9;
            assert_eq!(s.symmetric, axis, "{:?}", s.direction);
        }
    }

    #[test]
    fn concentric_components() {
        let h = 1.0 / 32.0;
        let d = DomainSpec::annulus(&[0.0, 0.0], 0.5, 1.0).unwrap();
        let v = moving_plane_scan(&d, &default_directions(2), &probe(h, 1.2)).unwrap();
        assert_eq!(v.classification, Classification::TwoConcentricSpheres);
        assert_eq!(v.components.len(), 2);
        let balls = DomainSpec::union_of_balls(&[vec![-0.6, 0.0], vec![0.6, 0.0]], &[0.3, 0.4]).unwrap();
        let v = moving_plane_scan(&balls, &default_directions(2), &probe(h, 1.2)).unwrap();
        assert_eq!(v.classification, Classification::Asymmetric);
    }

    #[test]
    fn sphere_fit_recovers_circle() {
        let pts: Vec<Point> = (0..40)
            .map(|k| {
                let a = k as f64 * 0.157;
                [1.0 + 2.0 * a.cos(), -0.5 + 2.0 * a.sin(), 0.0]
            })
            .collect();
        let f = fit_sphere(&pts, 2).unwrap();
        assert!(dist(&f.center, &[1.0, -0.5, 0.0]) < 1e-10 && (f.radius - 2.0).abs() < 1e-10);
    }
}
