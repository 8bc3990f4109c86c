//! Exact distance kernels for the closed-form domain kinds.

use super::{add, axpy, dist, dot, norm, normalize, scale, sub, tangent_frame, Point};

fn robust_length2(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

fn robust_length3(a: f64, b: f64, c: f64) -> f64 {
    a.hypot(b).hypot(c)
}

fn root2(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { robust_length2(n0, z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let a = n0 / (s + r0);
        let b = z1 / (s + 1.0);
        let g = a * a + b * b - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

fn root3(r0: f64, r1: f64, z0: f64, z1: f64, z2: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let n1 = r1 * z1;
    let mut s0 = z2 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { robust_length3(n0, n1, z2) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let a = n0 / (s + r0);
        let b = n1 / (s + r1);
        let c = z2 / (s + 1.0);
        let g = a * a + b * b + c * c - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Nearest point on the ellipse with semi-axes `e0 >= e1` to `y` in the first quadrant.
fn nearest_sorted2(e0: f64, e1: f64, y0: f64, y1: f64) -> (f64, f64) {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1) * (e0 / e1);
                let sbar = root2(r0, z0, z1, g);
                (r0 * y0 / (sbar + r0), y1 / (sbar + 1.0))
            } else {
                (y0, y1)
            }
        } else {
            (0.0, e1)
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            (e0 * xde0, e1 * (1.0 - xde0 * xde0).max(0.0).sqrt())
        } else {
            (e0, 0.0)
        }
    }
}

/// Nearest point on the ellipsoid with semi-axes `e0 >= e1 >= e2` to `y` in the first octant.
fn nearest_sorted3(e: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    let [e0, e1, e2] = e;
    let [y0, y1, y2] = y;
    if y2 > 0.0 {
        if y1 > 0.0 {
            if y0 > 0.0 {
                let z = [y0 / e0, y1 / e1, y2 / e2];
                let g = z[0] * z[0] + z[1] * z[1] + z[2] * z[2] - 1.0;
                if g != 0.0 {
                    let r0 = (e0 / e2) * (e0 / e2);
                    let r1 = (e1 / e2) * (e1 / e2);
                    let sbar = root3(r0, r1, z[0], z[1], z[2], g);
                    [r0 * y0 / (sbar + r0), r1 * y1 / (sbar + r1), y2 / (sbar + 1.0)]
                } else {
                    y
                }
            } else {
                let (x1, x2) = nearest_sorted2(e1, e2, y1, y2);
                [0.0, x1, x2]
            }
        } else if y0 > 0.0 {
            let (x0, x2) = nearest_sorted2(e0, e2, y0, y2);
            [x0, 0.0, x2]
        } else {
            [0.0, 0.0, e2]
        }
    } else {
        let denom0 = e0 * e0 - e2 * e2;
        let denom1 = e1 * e1 - e2 * e2;
        let numer0 = e0 * y0;
        let numer1 = e1 * y1;
        if numer0 < denom0 && numer1 < denom1 {
            let xde0 = numer0 / denom0;
            let xde1 = numer1 / denom1;
            let discr = 1.0 - xde0 * xde0 - xde1 * xde1;
            if discr > 0.0 {
                return [e0 * xde0, e1 * xde1, e2 * discr.sqrt()];
            }
        }
        let (x0, x1) = nearest_sorted2(e0, e1, y0, y1);
        [x0, x1, 0.0]
    }
}

/// Nearest boundary point of the axis-aligned ellipse `sum (x_i/a_i)^2 = 1`
/// centred at the origin, and whether `y` lies strictly inside.
pub fn ellipse_nearest_point(a: [f64; 2], y: [f64; 2]) -> ([f64; 2], bool) {
    let inside = (y[0] / a[0]).powi(2) + (y[1] / a[1]).powi(2) < 1.0;
    let swap = a[1] > a[0];
    let (e0, e1, y0, y1) = if swap {
        (a[1], a[0], y[1].abs(), y[0].abs())
    } else {
        (a[0], a[1], y[0].abs(), y[1].abs())
    };
    let (x0, x1) = nearest_sorted2(e0, e1, y0, y1);
    let (mut p0, mut p1) = if swap { (x1, x0) } else { (x0, x1) };
    p0 = p0.copysign(y[0]);
    p1 = p1.copysign(y[1]);
    ([p0, p1], inside)
}

/// Three-dimensional counterpart of [`ellipse_nearest_point`].
pub fn ellipsoid_nearest_point(a: [f64; 3], y: [f64; 3]) -> ([f64; 3], bool) {
    let inside = (0..3).map(|i| (y[i] / a[i]).powi(2)).sum::<f64>() < 1.0;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j].total_cmp(&a[i]));
    let e = [a[order[0]], a[order[1]], a[order[2]]];
    let ys = [y[order[0]].abs(), y[order[1]].abs(), y[order[2]].abs()];
    let xs = nearest_sorted3(e, ys);
    let mut p = [0.0; 3];
    for k in 0..3 {
        p[order[k]] = xs[k].copysign(y[order[k]]);
    }
    (p, inside)
}

pub(crate) fn ellipsoid_level(center: &Point, axes: &[f64; 3], dim: usize, x: &Point) -> f64 {
    let y = sub(x, center);
    if dim == 2 {
        let (p, inside) = ellipse_nearest_point([axes[0], axes[1]], [y[0], y[1]]);
        let d = (p[0] - y[0]).hypot(p[1] - y[1]);
        if inside {
            d
        } else {
            -d
        }
    } else {
        let (p, inside) = ellipsoid_nearest_point(*axes, y);
        let d = dist(&p, &y);
        if inside {
            d
        } else {
            -d
        }
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - s * ab[0]).hypot(ap[1] - s * ab[1])
}

pub(crate) fn polygon_level(vertices: &[[f64; 2]], x: &Point) -> f64 {
    let p = [x[0], x[1]];
    let n = vertices.len();
    let mut d = f64::INFINITY;
    let mut inside = false;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        d = d.min(segment_distance(p, a, b));
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let xc = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < xc {
                inside = !inside;
            }
        }
    }
    if inside {
        d
    } else {
        -d
    }
}

pub(crate) fn cuboid_level(lo: &Point, hi: &Point, dim: usize, x: &Point) -> f64 {
    let mut outside = 0.0;
    let mut qmax = f64::NEG_INFINITY;
    for a in 0..dim {
        let q = (lo[a] - x[a]).max(x[a] - hi[a]);
        qmax = qmax.max(q);
        if q > 0.0 {
            outside += q * q;
        }
    }
    if qmax < 0.0 {
        -qmax
    } else {
        -outside.sqrt()
    }
}

fn exposed(p: &Point, centers: &[Point], radii: &[f64], skip: &[usize]) -> bool {
    centers
        .iter()
        .zip(radii)
        .enumerate()
        .all(|(k, (c, r))| skip.contains(&k) || dist(p, c) >= r * (1.0 - 1e-12))
}

/// Circle where spheres `i` and `j` meet: centre, unit axis and radius.
fn sphere_pair_circle(c1: &Point, r1: f64, c2: &Point, r2: f64) -> Option<(Point, Point, f64)> {
    let d = dist(c1, c2);
    if d <= 0.0 || d >= r1 + r2 || d <= (r1 - r2).abs() {
        return None;
    }
    let n = scale(&sub(c2, c1), 1.0 / d);
    let a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let rho = (r1 * r1 - a * a).max(0.0).sqrt();
    Some((axpy(c1, a, &n), n, rho))
}

/// Signed distance to the boundary of a union of balls.
///
/// Outside, the distance to the union is the minimum over balls. Inside, the
/// nearest boundary point is a radial projection, a nearest point on a
/// pairwise intersection circle (two points in 2D), or a triple point (3D),
/// restricted to points not covered by another ball.
pub(crate) fn union_level(centers: &[Point], radii: &[f64], dim: usize, x: &Point) -> f64 {
    let outer = centers
        .iter()
        .zip(radii)
        .map(|(c, r)| r - dist(x, c))
        .fold(f64::NEG_INFINITY, f64::max);
    if outer <= 0.0 {
        return outer;
    }
    let mut best = f64::INFINITY;
    let consider = |p: Point, skip: &[usize], best: &mut f64| {
        let d = dist(x, &p);
        if d < *best && exposed(&p, centers, radii, skip) {
            *best = d;
        }
    };
    let m = centers.len();
    for i in 0..m {
        let v = sub(x, &centers[i]);
        let nv = norm(&v);
        let dir = if nv > 0.0 {
            scale(&v, 1.0 / nv)
        } else {
            [1.0, 0.0, 0.0]
        };
        consider(axpy(&centers[i], radii[i], &dir), &[i], &mut best);
    }
    if dim == 1 {
        return if best.is_finite() { best } else { outer };
    }
    for i in 0..m {
        for j in i + 1..m {
            let Some((mid, n, rho)) = sphere_pair_circle(&centers[i], radii[i], &centers[j], radii[j])
            else {
                continue;
            };
            if dim == 2 {
                let perp = [-n[1], n[0], 0.0];
                consider(axpy(&mid, rho, &perp), &[i, j], &mut best);
                consider(axpy(&mid, -rho, &perp), &[i, j], &mut best);
            } else {
                let w = sub(x, &mid);
                let v = sub(&w, &scale(&n, dot(&w, &n)));
                let dir = if norm(&v) > 1e-14 {
                    normalize(&v)
                } else {
                    tangent_frame(&n).0
                };
                consider(axpy(&mid, rho, &dir), &[i, j], &mut best);
                for k in 0..m {
                    if k == i || k == j {
                        continue;
                    }
                    let (u, t) = tangent_frame(&n);
                    let mc = sub(&mid, &centers[k]);
                    let a = 2.0 * rho * dot(&u, &mc);
                    let b = 2.0 * rho * dot(&t, &mc);
                    let c = radii[k] * radii[k] - dot(&mc, &mc) - rho * rho;
                    let r = a.hypot(b);
                    if r > 0.0 && c.abs() <= r {
                        let base = b.atan2(a);
                        let off = (c / r).acos();
                        for phi in [base + off, base - off] {
                            let p = add(&mid, &add(&scale(&u, rho * phi.cos()), &scale(&t, rho * phi.sin())));
                            consider(p, &[i, j, k], &mut best);
                        }
                    }
                }
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        outer
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipse_nearest_point_on_axes() {
        let (p, inside) = ellipse_nearest_point([2.0, 1.0], [3.0, 0.0]);
        assert!(!inside);
        assert!((p[0] - 2.0).abs() < 1e-14 && p[1].abs() < 1e-14);
        let (p, inside) = ellipse_nearest_point([2.0, 1.0], [0.0, 0.0]);
        assert!(inside);
        assert!(p[0].abs() < 1e-14 && (p[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ellipse_nearest_point_is_a_normal_foot() {
        let a = [2.0, 1.0];
        for y in [[0.7, 0.3], [-2.5, 1.5], [1.9, -0.05], [-0.2, -3.0]] {
            let (p, _) = ellipse_nearest_point(a, y);
            assert!(((p[0] / a[0]).powi(2) + (p[1] / a[1]).powi(2) - 1.0).abs() < 1e-12);
            // y - p must be parallel to the gradient (p0/a0^2, p1/a1^2)
            let g = [p[0] / (a[0] * a[0]), p[1] / (a[1] * a[1])];
            let r = [y[0] - p[0], y[1] - p[1]];
            assert!((g[0] * r[1] - g[1] * r[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn ellipsoid_matches_ellipse_in_a_coordinate_plane() {
        let (p3, _) = ellipsoid_nearest_point([3.0, 2.0, 1.0], [1.0, 0.0, 2.0]);
        let (p2, _) = ellipse_nearest_point([3.0, 1.0], [1.0, 2.0]);
        assert!((p3[0] - p2[0]).abs() < 1e-12 && (p3[2] - p2[1]).abs() < 1e-12);
        assert_eq!(p3[1], 0.0);
    }

    #[test]
    fn polygon_and_box_levels() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!((polygon_level(&sq, &[0.5, 0.25, 0.0]) - 0.25).abs() < 1e-15);
        assert!((polygon_level(&sq, &[2.0, 0.5, 0.0]) + 1.0).abs() < 1e-15);
        let lo = [0.0; 3];
        let hi = [1.0, 1.0, 0.0];
        assert!((cuboid_level(&lo, &hi, 2, &[0.5, 0.25, 0.0]) - 0.25).abs() < 1e-15);
        assert!((cuboid_level(&lo, &hi, 2, &[2.0, 2.0, 0.0]) + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn union_of_two_discs_inside_distance() {
        let c = [[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]];
        let r = [0.75, 0.75];
        // at the origin the nearest boundary points are the two waist points
        let waist = (0.75f64 * 0.75 - 0.25).sqrt();
        assert!((union_level(&c, &r, 2, &[0.0; 3]) - waist).abs() < 1e-14);
        // far side of the left disc
        assert!((union_level(&c, &r, 2, &[-1.0, 0.0, 0.0]) - 0.25).abs() < 1e-14);
        assert!((union_level(&c, &r, 2, &[2.0, 0.0, 0.0]) + 0.75).abs() < 1e-14);
    }
}
