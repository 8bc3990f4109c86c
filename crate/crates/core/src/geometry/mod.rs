//! Domains, signed distance, curvature, parallel sets and the geometric
//! predicates used by the detectors.
//!
//! Points are stored as `[f64; 3]` whatever the dimension; unused trailing
//! coordinates are zero.

mod curvature;
mod domain;
mod fmm;
mod ops;
mod primitives;
mod sdf;
mod surface;

pub use curvature::{level_set_curvatures, principal_curvatures, principal_curvatures_tol};
pub use domain::{DomainSpec, Shape};
pub use fmm::fast_marching;
pub use ops::{
    cone_condition_check, parallel_body, reflect, reflection_containment, touching_ball,
    touching_ball_with, tubular_radius, TouchingBall,
};
pub use primitives::{ellipse_nearest_point, ellipsoid_nearest_point};
pub use sdf::{build_signed_distance, build_signed_distance_with_margin, SignedDistanceField};
pub use surface::{
    extract_level_set, level_band_measure, parallel_surface, sample_boundary, Facet,
    SurfaceSample,
};

pub type Point = [f64; 3];

pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s b`
pub fn axpy(a: &Point, s: f64, b: &Point) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

/// Unit vector along `a`; the zero vector is returned unchanged.
pub fn normalize(a: &Point) -> Point {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        *a
    }
}

pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Pads a slice of up to three coordinates into a `Point`.
pub fn point(c: &[f64]) -> Point {
    let mut p = [0.0; 3];
    p[..c.len().min(3)].copy_from_slice(&c[..c.len().min(3)]);
    p
}

/// Two unit vectors completing `n` to an orthonormal frame of R^3.
pub fn tangent_frame(n: &Point) -> (Point, Point) {
    let helper = if n[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let t1 = normalize(&cross(n, &helper));
    let t2 = cross(n, &t1);
    (t1, t2)
}
