use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::curvature::{level_set_curvatures, principal_curvatures_tol};
use super::domain::Shape;
use super::{add, cross, dist, dot, norm, normalize, scale, sub, DomainSpec, Point, SignedDistanceField};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// A surface point with a unit normal, principal curvatures signed with
/// respect to that normal (ascending), a tag and the surface measure it
/// represents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub point: Point,
    pub inward_normal: Point,
    pub curvatures: Vec<f64>,
    pub surface_id: String,
    /// Length (2D) or area (3D) element carried by the sample; 1 in 1D.
    pub weight: f64,
}

impl SurfaceSample {
    /// Same point seen from the other side: normal and curvature signs reversed.
    pub fn flipped(&self) -> Self {
        let mut curvatures: Vec<f64> = self.curvatures.iter().map(|k| -k).collect();
        curvatures.sort_by(f64::total_cmp);
        Self {
            point: self.point,
            inward_normal: scale(&self.inward_normal, -1.0),
            curvatures,
            surface_id: self.surface_id.clone(),
            weight: self.weight,
        }
    }

    pub fn relabel(mut self, id: &str) -> Self {
        self.surface_id = id.to_string();
        self
    }
}

/// Piece of an extracted level set: a point (1D), segment (2D) or triangle (3D).
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: Vec<Point>,
}

impl Facet {
    pub fn measure(&self) -> f64 {
        match self.vertices.len() {
            1 => 1.0,
            2 => dist(&self.vertices[0], &self.vertices[1]),
            _ => {
                let a = sub(&self.vertices[1], &self.vertices[0]);
                let b = sub(&self.vertices[2], &self.vertices[0]);
                0.5 * norm(&cross(&a, &b))
            }
        }
    }

    pub fn centroid(&self) -> Point {
        let mut c = [0.0; 3];
        for v in &self.vertices {
            c = add(&c, v);
        }
        scale(&c, 1.0 / self.vertices.len() as f64)
    }
}

fn crossing(pa: &Point, fa: f64, pb: &Point, fb: f64) -> Point {
    let s = fa / (fa - fb);
    add(pa, &scale(&sub(pb, pa), s))
}

fn simplex_facets(pts: &[Point], f: &[f64], out: &mut Vec<Facet>) {
    let inside: Vec<bool> = f.iter().map(|v| *v >= 0.0).collect();
    let n_in = inside.iter().filter(|b| **b).count();
    if n_in == 0 || n_in == pts.len() {
        return;
    }
    let mut cuts = Vec::with_capacity(4);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if inside[i] != inside[j] {
                cuts.push(crossing(&pts[i], f[i], &pts[j], f[j]));
            }
        }
    }
    match cuts.len() {
        2 | 3 => out.push(Facet { vertices: cuts }),
        4 => {
            // two in, two out: the cuts, in edge order (01? no: pairs in/out), form a quad
            // ordered a-b-d-c for edges (i0,o0),(i0,o1),(i1,o0),(i1,o1)
            let (a, b, c, d) = (cuts[0], cuts[1], cuts[2], cuts[3]);
            let _ = (&a, &b, &c, &d);
            let (q0, q1, q2, q3) = quad_order(pts, &inside, f);
            out.push(Facet {
                vertices: vec![q0, q1, q2],
            });
            out.push(Facet {
                vertices: vec![q0, q2, q3],
            });
        }
        _ => {}
    }
}

/// Cut points of a tetrahedron with two vertices on each side, in cyclic order.
fn quad_order(pts: &[Point], inside: &[bool], f: &[f64]) -> (Point, Point, Point, Point) {
    let ins: Vec<usize> = (0..4).filter(|&k| inside[k]).collect();
    let outs: Vec<usize> = (0..4).filter(|&k| !inside[k]).collect();
    let c = |i: usize, o: usize| crossing(&pts[i], f[i], &pts[o], f[o]);
    (
        c(ins[0], outs[0]),
        c(ins[0], outs[1]),
        c(ins[1], outs[1]),
        c(ins[1], outs[0]),
    )
}

const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Facets of `{ values = level }` by linear interpolation on a simplicial
/// split of every cell (two triangles per square, six tetrahedra per cube).
/// `window` restricts the search to cells meeting the given box.
pub fn extract_level_set(
    grid: &GridSpec,
    values: &[f64],
    level: f64,
    window: Option<(Point, Point)>,
) -> Vec<Facet> {
    let dim = grid.dim();
    let mut lo_cell = [0usize; 3];
    let mut hi_cell = [0usize; 3];
    for a in 0..dim {
        hi_cell[a] = grid.extents[a];
        if let Some((lo, hi)) = window {
            let h = grid.spacing[a];
            let l = ((lo[a] - grid.origin[a]) / h).floor() - 1.0;
            let u = ((hi[a] - grid.origin[a]) / h).ceil() + 1.0;
            lo_cell[a] = l.clamp(0.0, grid.extents[a] as f64) as usize;
            hi_cell[a] = u.clamp(0.0, grid.extents[a] as f64) as usize;
        }
    }
    for a in dim..3 {
        hi_cell[a] = 1;
    }
    let mut out = Vec::new();
    let ncorner = 1usize << dim;
    let mut pts = vec![[0.0; 3]; ncorner];
    let mut fv = vec![0.0; ncorner];
    for k in lo_cell[2]..hi_cell[2] {
        for j in lo_cell[1]..hi_cell[1] {
            for i in lo_cell[0]..hi_cell[0] {
                let base = [i, j, k];
                let mut any_in = false;
                let mut any_out = false;
                for c in 0..ncorner {
                    let mut ijk = base;
                    for a in 0..dim {
                        ijk[a] += (c >> a) & 1;
                    }
                    pts[c] = grid.coord_of(ijk);
                    fv[c] = values[grid.index(ijk)] - level;
                    if fv[c] >= 0.0 {
                        any_in = true;
                    } else {
                        any_out = true;
                    }
                }
                if !(any_in && any_out) {
                    continue;
                }
                match dim {
                    1 => simplex_facets(&pts, &fv, &mut out),
                    2 => {
                        for tri in [[0usize, 1, 3], [0, 3, 2]] {
                            let p: Vec<Point> = tri.iter().map(|&c| pts[c]).collect();
                            let f: Vec<f64> = tri.iter().map(|&c| fv[c]).collect();
                            simplex_facets(&p, &f, &mut out);
                        }
                    }
                    _ => {
                        for tet in KUHN {
                            let p: Vec<Point> = tet.iter().map(|&c| pts[c]).collect();
                            let f: Vec<f64> = tet.iter().map(|&c| fv[c]).collect();
                            simplex_facets(&p, &f, &mut out);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Samples of the parallel surface `{ d* = s }`, one per extracted facet.
///
/// Normals are `-grad d* / |grad d*|` (pointing toward the boundary of the
/// domain) and curvatures are taken with respect to that normal.
pub fn parallel_surface(sdf: &SignedDistanceField, s: f64) -> Result<Vec<SurfaceSample>> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("parallel surface offset must be > 0, got {s}")));
    }
    let facets = extract_level_set(&sdf.grid, &sdf.values, s, None);
    let dim = sdf.grid.dim();
    Ok(facets
        .iter()
        .map(|f| {
            let x = f.centroid();
            let g = sdf.gradient(&x);
            let h = sdf.hessian(&x);
            let gn = norm(&g);
            let n = normalize(&scale(&g, -1.0));
            let mut hf = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    hf[i][j] = -h[i][j];
                }
            }
            SurfaceSample {
                point: x,
                inward_normal: n,
                curvatures: level_set_curvatures(&n, gn.max(1e-300), &hf, dim),
                surface_id: format!("parallel_surface:{s}"),
                weight: f.measure(),
            }
        })
        .collect())
}

fn clipped_segment_length(a: &Point, b: &Point, c: &Point, r: f64) -> f64 {
    let d = sub(b, a);
    let len2 = dot(&d, &d);
    if len2 == 0.0 {
        return 0.0;
    }
    let m = sub(a, c);
    let bq = dot(&m, &d);
    let cq = dot(&m, &m) - r * r;
    let disc = bq * bq - len2 * cq;
    if disc <= 0.0 {
        return 0.0;
    }
    let sq = disc.sqrt();
    let t0 = ((-bq - sq) / len2).max(0.0);
    let t1 = ((-bq + sq) / len2).min(1.0);
    (t1 - t0).max(0.0) * len2.sqrt()
}

fn clipped_triangle_area(v: &[Point; 3], c: &Point, r: f64, depth: usize) -> f64 {
    let inside = v.iter().filter(|p| dist(p, c) < r).count();
    let area = 0.5 * norm(&cross(&sub(&v[1], &v[0]), &sub(&v[2], &v[0])));
    if inside == 3 {
        return area;
    }
    let cen = scale(&add(&add(&v[0], &v[1]), &v[2]), 1.0 / 3.0);
    let rad = v.iter().map(|p| dist(p, &cen)).fold(0.0, f64::max);
    if dist(&cen, c) > r + rad {
        return 0.0;
    }
    if depth == 0 {
        return if dist(&cen, c) < r { area } else { 0.0 };
    }
    let m01 = scale(&add(&v[0], &v[1]), 0.5);
    let m12 = scale(&add(&v[1], &v[2]), 0.5);
    let m20 = scale(&add(&v[2], &v[0]), 0.5);
    [
        [v[0], m01, m20],
        [m01, v[1], m12],
        [m20, m12, v[2]],
        [m01, m12, m20],
    ]
    .iter()
    .map(|t| clipped_triangle_area(t, c, r, depth - 1))
    .sum()
}

/// Measure of `{ d* = s }` inside the ball `B_R(x0)`, which must lie in the domain.
///
/// Segments are clipped exactly; triangles are clipped by six levels of
/// recursive subdivision.
pub fn level_band_measure(sdf: &SignedDistanceField, s: f64, x0: &Point, r: f64) -> Result<f64> {
    let h = sdf.grid.max_spacing();
    let depth = sdf.domain.level(x0);
    if depth < r - h {
        return Err(Error::Geometry(format!(
            "ball of radius {r} at {x0:?} leaves the domain (distance to boundary {depth})"
        )));
    }
    let dim = sdf.grid.dim();
    let mut lo = *x0;
    let mut hi = *x0;
    for a in 0..dim {
        lo[a] -= r;
        hi[a] += r;
    }
    let facets = extract_level_set(&sdf.grid, &sdf.values, s, Some((lo, hi)));
    Ok(facets
        .iter()
        .map(|f| match f.vertices.len() {
            1 => {
                if dist(&f.vertices[0], x0) < r {
                    1.0
                } else {
                    0.0
                }
            }
            2 => clipped_segment_length(&f.vertices[0], &f.vertices[1], x0, r),
            _ => clipped_triangle_area(&[f.vertices[0], f.vertices[1], f.vertices[2]], x0, r, 6),
        })
        .sum())
}

fn round_up(n: usize, m: usize) -> usize {
    n.div_ceil(m) * m
}

/// Samples of a sphere. `sign = +1` when the domain is the inside of the
/// sphere, `-1` when it is the outside.
fn sphere_samples(c: &Point, r: f64, dim: usize, density: f64, sign: f64, id: &str) -> Vec<SurfaceSample> {
    let mk = |u: Point, w: f64| SurfaceSample {
        point: add(c, &scale(&u, r)),
        inward_normal: scale(&u, -sign),
        curvatures: vec![sign / r; dim - 1],
        surface_id: id.to_string(),
        weight: w,
    };
    match dim {
        1 => vec![mk([1.0, 0.0, 0.0], 1.0), mk([-1.0, 0.0, 0.0], 1.0)],
        2 => {
            let n = round_up(((2.0 * PI * r * density).ceil() as usize).max(16), 8);
            (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    mk([t.cos(), t.sin(), 0.0], 2.0 * PI * r / n as f64)
                })
                .collect()
        }
        _ => {
            let nt = ((PI * r * density).ceil() as usize).max(8);
            let mut out = Vec::new();
            for i in 0..nt {
                let t0 = PI * i as f64 / nt as f64;
                let t1 = PI * (i + 1) as f64 / nt as f64;
                let t = 0.5 * (t0 + t1);
                let np = round_up(((2.0 * PI * r * t.sin() * density).ceil() as usize).max(8), 4);
                let w = r * r * (t0.cos() - t1.cos()) * 2.0 * PI / np as f64;
                for k in 0..np {
                    let p = 2.0 * PI * k as f64 / np as f64;
                    out.push(mk([t.sin() * p.cos(), t.sin() * p.sin(), t.cos()], w));
                }
            }
            out
        }
    }
}

fn ellipsoid_samples(domain: &DomainSpec, c: &Point, a: &[f64; 3], density: f64) -> Result<Vec<SurfaceSample>> {
    let dim = domain.dim();
    let amax = a.iter().take(dim).cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    let tol = 1e-9 * amax.max(1.0);
    if dim == 2 {
        let n = round_up(((2.0 * PI * amax * density).ceil() as usize).max(16), 8);
        for k in 0..n {
            let t = 2.0 * PI * k as f64 / n as f64;
            let p = [c[0] + a[0] * t.cos(), c[1] + a[1] * t.sin(), 0.0];
            let speed = (a[0] * t.sin()).hypot(a[1] * t.cos());
            let mut s = principal_curvatures_tol(domain, &p, tol)?;
            s.weight = speed * 2.0 * PI / n as f64;
            out.push(s);
        }
    } else {
        let nt = ((PI * amax * density).ceil() as usize).max(8);
        for i in 0..nt {
            let t = PI * (i as f64 + 0.5) / nt as f64;
            let dt = PI / nt as f64;
            let np = round_up(((2.0 * PI * amax * t.sin() * density).ceil() as usize).max(8), 4);
            let dp = 2.0 * PI / np as f64;
            for k in 0..np {
                let ph = dp * k as f64;
                let (st, ct, sp, cp) = (t.sin(), t.cos(), ph.sin(), ph.cos());
                let p = [c[0] + a[0] * st * cp, c[1] + a[1] * st * sp, c[2] + a[2] * ct];
                let xt = [a[0] * ct * cp, a[1] * ct * sp, -a[2] * st];
                let xp = [-a[0] * st * sp, a[1] * st * cp, 0.0];
                let mut s = principal_curvatures_tol(domain, &p, tol)?;
                s.weight = norm(&cross(&xt, &xp)) * dt * dp;
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn polygon_samples(vertices: &[[f64; 2]], density: f64, id: &str) -> Vec<SurfaceSample> {
    let n = vertices.len();
    let area2: f64 = (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum();
    let ccw = area2 > 0.0;
    let mut out = Vec::new();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let m = ((len * density).ceil() as usize).max(1);
        let t = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let nrm = if ccw { [-t[1], t[0], 0.0] } else { [t[1], -t[0], 0.0] };
        for k in 0..m {
            let s = k as f64 / m as f64;
            out.push(SurfaceSample {
                point: [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), 0.0],
                inward_normal: nrm,
                curvatures: vec![0.0],
                surface_id: id.to_string(),
                weight: len / m as f64,
            });
        }
    }
    out
}

fn cuboid_samples(lo: &Point, hi: &Point, dim: usize, density: f64, id: &str) -> Vec<SurfaceSample> {
    match dim {
        1 => vec![
            SurfaceSample {
                point: [lo[0], 0.0, 0.0],
                inward_normal: [1.0, 0.0, 0.0],
                curvatures: vec![],
                surface_id: id.into(),
                weight: 1.0,
            },
            SurfaceSample {
                point: [hi[0], 0.0, 0.0],
                inward_normal: [-1.0, 0.0, 0.0],
                curvatures: vec![],
                surface_id: id.into(),
                weight: 1.0,
            },
        ],
        2 => polygon_samples(&[[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]], density, id),
        _ => {
            let mut out = Vec::new();
            for axis in 0..3 {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let nu = (((hi[u] - lo[u]) * density).ceil() as usize).max(1);
                let nv = (((hi[v] - lo[v]) * density).ceil() as usize).max(1);
                let du = (hi[u] - lo[u]) / nu as f64;
                let dv = (hi[v] - lo[v]) / nv as f64;
                for (face, sign) in [(lo[axis], 1.0), (hi[axis], -1.0)] {
                    for i in 0..nu {
                        for j in 0..nv {
                            let mut p = [0.0; 3];
                            p[axis] = face;
                            p[u] = lo[u] + (i as f64 + 0.5) * du;
                            p[v] = lo[v] + (j as f64 + 0.5) * dv;
                            let mut n = [0.0; 3];
                            n[axis] = sign;
                            out.push(SurfaceSample {
                                point: p,
                                inward_normal: n,
                                curvatures: vec![0.0, 0.0],
                                surface_id: id.into(),
                                weight: du * dv,
                            });
                        }
                    }
                }
            }
            out
        }
    }
}

/// Samples of a zero set found by contouring the level function on an
/// auxiliary grid, each projected back onto the zero set by Newton steps.
fn contour_samples(domain: &DomainSpec, density: f64) -> Result<Vec<SurfaceSample>> {
    let (lo, hi) = domain.boundary_bounds().ok_or(Error::UnsupportedKind {
        op: "sample_boundary (unbounded boundary)",
        kind: domain.kind().to_string(),
    })?;
    let dim = domain.dim();
    let h = 1.0 / density;
    let grid = GridSpec::covering(&lo[..dim], &hi[..dim], h, 2.0 * h)?;
    let values: Vec<f64> = (0..grid.node_count()).map(|i| domain.level(&grid.coord(i))).collect();
    let facets = extract_level_set(&grid, &values, 0.0, None);
    let eta = 1e-6 * domain.length_scale().max(1e-3);
    let mut out = Vec::with_capacity(facets.len());
    for f in &facets {
        let mut x = f.centroid();
        for _ in 0..6 {
            let v = domain.level(&x);
            let g = domain.level_gradient(&x, eta);
            let g2 = dot(&g, &g);
            if g2 == 0.0 || v.abs() < 1e-13 {
                break;
            }
            x = sub(&x, &scale(&g, v / g2));
        }
        let mut s = principal_curvatures_tol(domain, &x, 10.0 * h)?;
        s.weight = f.measure();
        out.push(s);
    }
    Ok(out)
}

/// Samples of the boundary with normals pointing into the domain and
/// curvatures with respect to them. `density` is the number of samples per
/// unit length along the surface (so `density^2` per unit area in 3D).
pub fn sample_boundary(domain: &DomainSpec, density: f64) -> Result<Vec<SurfaceSample>> {
    if !(density > 0.0) {
        return Err(Error::Config(format!("sampling density must be > 0, got {density}")));
    }
    let dim = domain.dim();
    let id = domain.kind();
    Ok(match domain.shape() {
        Shape::Ball { center, radius } => sphere_samples(center, *radius, dim, density, 1.0, id),
        Shape::Annulus {
            center,
            inner,
            outer,
        } => {
            let mut v = sphere_samples(center, *inner, dim, density, -1.0, id);
            v.extend(sphere_samples(center, *outer, dim, density, 1.0, id));
            v
        }
        Shape::Ellipsoid { center, semi_axes } => ellipsoid_samples(domain, center, semi_axes, density)?,
        Shape::UnionOfBalls { centers, radii } => {
            let mut v = Vec::new();
            for (i, (c, r)) in centers.iter().zip(radii).enumerate() {
                for s in sphere_samples(c, *r, dim, density, 1.0, id) {
                    let covered = centers
                        .iter()
                        .zip(radii)
                        .enumerate()
                        .any(|(k, (ck, rk))| k != i && dist(&s.point, ck) < *rk);
                    if !covered {
                        v.push(s);
                    }
                }
            }
            v
        }
        Shape::Polygon { vertices } => polygon_samples(vertices, density, id),
        Shape::Cuboid { lo, hi } => cuboid_samples(lo, hi, dim, density, id),
        Shape::HalfSpace { .. } => {
            return Err(Error::UnsupportedKind {
                op: "sample_boundary (unbounded boundary)",
                kind: id.to_string(),
            })
        }
        Shape::ParallelBody { base, radius } if matches!(base.shape(), Shape::Ball { .. }) => {
            let Shape::Ball { center, radius: r0 } = base.shape() else { unreachable!() };
            sphere_samples(center, r0 + radius, dim, density, 1.0, id)
        }
        Shape::Complement { of } => sample_boundary(of, density)?
            .into_iter()
            .map(|s| s.flipped().relabel(id))
            .collect(),
        _ => contour_samples(domain, density)?,
    })
}
