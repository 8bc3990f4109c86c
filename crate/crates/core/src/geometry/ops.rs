use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::domain::Shape;
use super::surface::sample_boundary;
use super::{add, axpy, dist, dot, normalize, scale, sub, tangent_frame, DomainSpec, Point};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Half of the estimated two-sided reach of the boundary.
pub fn tubular_radius(domain: &DomainSpec) -> Result<f64> {
    let dim = domain.dim();
    let unsupported = || Error::UnsupportedKind {
        op: "tubular_radius",
        kind: domain.kind().to_string(),
    };
    let reach = match domain.shape() {
        Shape::Ball { radius, .. } => *radius,
        Shape::Annulus { inner, outer, .. } => inner.min(0.5 * (outer - inner)),
        Shape::Ellipsoid { semi_axes, .. } => {
            let a = &semi_axes[..dim];
            let amax = a.iter().cloned().fold(0.0, f64::max);
            let amin = a.iter().cloned().fold(f64::INFINITY, f64::min);
            amin * amin / amax
        }
        Shape::HalfSpace { .. } => f64::INFINITY,
        Shape::UnionOfBalls { centers, radii } => {
            let mut r = radii.iter().cloned().fold(f64::INFINITY, f64::min);
            for i in 0..centers.len() {
                for j in i + 1..centers.len() {
                    let gap = dist(&centers[i], &centers[j]) - radii[i] - radii[j];
                    if gap <= 0.0 {
                        return Err(unsupported());
                    }
                    r = r.min(0.5 * gap);
                }
            }
            r
        }
        Shape::Polygon { .. } | Shape::Cuboid { .. } => return Err(unsupported()),
        Shape::Complement { of } => return tubular_radius(of),
        Shape::ParallelBody { base, radius } => match base.shape() {
            Shape::Ball { radius: r, .. } => r + radius,
            _ => ray_reach(domain)?,
        },
        _ => ray_reach(domain)?,
    };
    Ok(0.5 * reach)
}

/// Reach estimated by marching along normal rays from boundary samples until
/// the ray point becomes closer to some other sample than to its foot.
fn ray_reach(domain: &DomainSpec) -> Result<f64> {
    let density = 64.0;
    let slack = 2.0 / density;
    let samples = sample_boundary(domain, density)?;
    let len = domain.length_scale();
    let steps = 400;
    let mut reach = len;
    for s in &samples {
        for sign in [1.0, -1.0] {
            let n = scale(&s.inward_normal, sign);
            for k in 1..=steps {
                let r = len * k as f64 / steps as f64;
                if r >= reach {
                    break;
                }
                let q = axpy(&s.point, r, &n);
                let near = samples.iter().map(|o| dist(&q, &o.point)).fold(f64::INFINITY, f64::min);
                if near < r * (1.0 - 1e-3) - slack {
                    // the detection lags the medial axis by at most the slack
                    reach = reach.min((r - slack).max(slack));
                    break;
                }
            }
        }
    }
    Ok(reach)
}

/// The open `R`-neighbourhood of the closure of `d`.
pub fn parallel_body(d: &DomainSpec, radius: f64) -> Result<DomainSpec> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("parallel body radius must be > 0, got {radius}")));
    }
    Ok(DomainSpec::with_shape(
        "parallel_body",
        json!({"base": d, "radius": radius}),
        d.dim(),
        Shape::ParallelBody {
            base: Box::new(d.clone()),
            radius,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchingBall {
    pub radius: f64,
    pub y0: Point,
    /// Number of distinct nearest boundary points found; curvature-limit
    /// statements about the touching ball need exactly one.
    pub contact_count: usize,
}

pub fn touching_ball(domain: &DomainSpec, x0: &Point, direction: &Point) -> Result<TouchingBall> {
    touching_ball_with(domain, x0, direction, 1e-3)
}

/// Largest ball centred at `x0` inside the domain and its contact points.
///
/// Nearest points are searched among dense boundary samples; samples within
/// a second-order tolerance of the minimum distance are clustered with radius
/// `3 max(spacing, h)`. With several contacts, `y0` is the one best aligned
/// with `direction`.
pub fn touching_ball_with(domain: &DomainSpec, x0: &Point, direction: &Point, h: f64) -> Result<TouchingBall> {
    let level = domain.level(x0);
    if !(level > 0.0) {
        return Err(Error::Geometry(format!("touching ball centre {x0:?} is not inside the domain")));
    }
    if let Shape::HalfSpace { normal, .. } = domain.shape() {
        return Ok(TouchingBall {
            radius: level,
            y0: axpy(x0, -level, normal),
            contact_count: 1,
        });
    }
    let delta = if domain.dim() == 3 { 5e-3 } else { 1e-4 };
    let samples = sample_boundary(domain, 1.0 / delta)?;
    let d: Vec<f64> = samples.iter().map(|s| dist(&s.point, x0)).collect();
    let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 0.25 * delta * delta / dmin + 1e-12;
    let mut order: Vec<usize> = (0..samples.len()).filter(|&i| d[i] <= dmin + tol).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let cluster_radius = 3.0 * delta.max(h);
    let mut seeds: Vec<usize> = Vec::new();
    for i in order {
        if seeds.iter().all(|&s| dist(&samples[s].point, &samples[i].point) > cluster_radius) {
            seeds.push(i);
        }
    }
    let dir = normalize(direction);
    let best = *seeds
        .iter()
        .max_by(|&&a, &&b| {
            let da = dot(&normalize(&sub(&samples[a].point, x0)), &dir);
            let db = dot(&normalize(&sub(&samples[b].point, x0)), &dir);
            da.total_cmp(&db).then(b.cmp(&a))
        })
        .expect("at least one nearest sample");
    let (radius, y0) = if domain.is_exact() && seeds.len() == 1 {
        let eta = 1e-6 * domain.length_scale().max(1e-3);
        let g = normalize(&domain.level_gradient(x0, eta));
        (level, axpy(x0, -level, &g))
    } else {
        (dmin, samples[best].point)
    };
    Ok(TouchingBall {
        radius,
        y0,
        contact_count: seeds.len(),
    })
}

/// Mirror image of `p` in the hyperplane `{ x . l = lambda }`.
pub fn reflect(p: &Point, l: &Point, lambda: f64) -> Point {
    axpy(p, -2.0 * (dot(p, l) - lambda), l)
}

/// Discrete check that the reflection of the cap `{ x in D : x . l > lambda }`
/// lies in `D`. Cap nodes within one spacing of the boundary are skipped;
/// reflected points on or outside the boundary count as not contained.
pub fn reflection_containment(d: &DomainSpec, l: &Point, lambda: f64, probe: &GridSpec) -> bool {
    let h = probe.max_spacing();
    (0..probe.node_count()).all(|i| {
        let p = probe.coord(i);
        if dot(&p, l) <= lambda || d.level(&p) <= h {
            return true;
        }
        d.level(&reflect(&p, l, lambda)) > 0.0
    })
}

/// Sampled interior cone test at a boundary point `x`.
///
/// The cone has height `rho`, half-angle `pi/2 - theta` and its axis points
/// from `x` toward the centroid of `D` within `B_rho(x)`. Every sampled cone
/// point other than the apex must lie strictly inside `D`.
pub fn cone_condition_check(d: &DomainSpec, x: &Point, theta: f64, rho: f64) -> bool {
    let dim = d.dim();
    let axis = match local_centroid(d, x, rho) {
        Some(c) => normalize(&sub(&c, x)),
        None => return false,
    };
    let half = 0.5 * PI - theta;
    let mut dirs: Vec<Point> = Vec::new();
    match dim {
        1 => dirs.push(axis),
        2 => {
            let perp = [-axis[1], axis[0], 0.0];
            for k in 0..=16 {
                let a = -half + 2.0 * half * k as f64 / 16.0;
                dirs.push(add(&scale(&axis, a.cos()), &scale(&perp, a.sin())));
            }
        }
        _ => {
            let (t1, t2) = tangent_frame(&axis);
            dirs.push(axis);
            for i in 1..=8 {
                let a = half * i as f64 / 8.0;
                for k in 0..16 {
                    let b = 2.0 * PI * k as f64 / 16.0;
                    let side = add(&scale(&t1, b.cos()), &scale(&t2, b.sin()));
                    dirs.push(add(&scale(&axis, a.cos()), &scale(&side, a.sin())));
                }
            }
        }
    }
    // radial height of the cone along a ray at angle a is rho / cos(a)
    dirs.iter().all(|u| {
        let cos_a = dot(u, &axis).max(1e-12);
        (1..=32).all(|k| {
            let r = rho * k as f64 / 32.0 / cos_a;
            d.level(&axpy(x, r, u)) > 0.0
        })
    })
}

fn local_centroid(d: &DomainSpec, x: &Point, rho: f64) -> Option<Point> {
    let dim = d.dim();
    let m: i64 = if dim == 3 { 16 } else { 64 };
    let step = rho / m as f64;
    let mut sum = [0.0; 3];
    let mut count = 0usize;
    let range = -m..=m;
    let zr = |a: usize| if a < dim { range.clone() } else { 0..=0 };
    for k in zr(2) {
        for j in zr(1) {
            for i in zr(0) {
                let off = [i as f64 * step, j as f64 * step, k as f64 * step];
                if dot(&off, &off) > rho * rho {
                    continue;
                }
                let p = add(x, &off);
                if d.level(&p) > 0.0 {
                    sum = add(&sum, &p);
                    count += 1;
                }
            }
        }
    }
    (count > 0).then(|| scale(&sum, 1.0 / count as f64))
}
