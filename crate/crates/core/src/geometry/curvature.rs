use super::domain::Shape;
use super::surface::SurfaceSample;
use super::{dist, dot, normalize, sub, tangent_frame, DomainSpec, Point};
use crate::error::{Error, Result};

/// Principal curvatures of a level set of `f` with respect to the unit normal
/// `n = grad f / |grad f|`, from the Hessian of `f`.
///
/// A level set bounding the region `{f > c}` from outside gets positive
/// curvature when that region is convex. Returned in ascending order.
pub fn level_set_curvatures(n: &Point, grad_norm: f64, hess: &[[f64; 3]; 3], dim: usize) -> Vec<f64> {
    let quad = |u: &Point, v: &Point| {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += u[i] * hess[i][j] * v[j];
            }
        }
        -s / grad_norm
    };
    match dim {
        1 => Vec::new(),
        2 => {
            let t = [-n[1], n[0], 0.0];
            vec![quad(&t, &t)]
        }
        _ => {
            let (t1, t2) = tangent_frame(n);
            let a = quad(&t1, &t1);
            let b = quad(&t1, &t2);
            let c = quad(&t2, &t2);
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            vec![mean - rad, mean + rad]
        }
    }
}

/// Principal curvatures of the boundary at `xi`, signed with respect to the
/// inward normal (a sphere of radius `r` bounding a ball has `1/r`).
///
/// `xi` must be within `1e-6` (relative to the domain size) of the boundary.
pub fn principal_curvatures(domain: &DomainSpec, xi: &Point) -> Result<SurfaceSample> {
    principal_curvatures_tol(domain, xi, 1e-6 * domain.length_scale().max(1.0))
}

pub fn principal_curvatures_tol(domain: &DomainSpec, xi: &Point, tol: f64) -> Result<SurfaceSample> {
    let dim = domain.dim();
    let level = domain.level(xi);
    if level.abs() > tol {
        return Err(Error::OffSurface {
            point: *xi,
            distance: level.abs(),
            tolerance: tol,
        });
    }
    let sample = |normal: Point, kappa: f64| SurfaceSample {
        point: *xi,
        inward_normal: normal,
        curvatures: vec![kappa; dim.saturating_sub(1)],
        surface_id: domain.kind().to_string(),
        weight: 0.0,
    };
    match domain.shape() {
        Shape::Ball { center, radius } => Ok(sample(normalize(&sub(center, xi)), 1.0 / radius)),
        Shape::Annulus {
            center,
            inner,
            outer,
        } => {
            let r = dist(xi, center);
            if (r - inner).abs() < (r - outer).abs() {
                Ok(sample(normalize(&sub(xi, center)), -1.0 / inner))
            } else {
                Ok(sample(normalize(&sub(center, xi)), 1.0 / outer))
            }
        }
        Shape::HalfSpace { normal, .. } => Ok(sample(*normal, 0.0)),
        Shape::UnionOfBalls { centers, radii } => {
            let (k, _) = centers
                .iter()
                .zip(radii)
                .enumerate()
                .map(|(k, (c, r))| (k, (dist(xi, c) - r).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            Ok(sample(normalize(&sub(&centers[k], xi)), 1.0 / radii[k]))
        }
        Shape::Ellipsoid { center, semi_axes } => {
            // f = 1 - sum (y_i / a_i)^2 increases inward
            let y = sub(xi, center);
            let mut g = [0.0; 3];
            let mut h = [[0.0; 3]; 3];
            for a in 0..dim {
                g[a] = -2.0 * y[a] / (semi_axes[a] * semi_axes[a]);
                h[a][a] = -2.0 / (semi_axes[a] * semi_axes[a]);
            }
            let gn = dot(&g, &g).sqrt();
            let n = normalize(&g);
            Ok(SurfaceSample {
                point: *xi,
                inward_normal: n,
                curvatures: level_set_curvatures(&n, gn, &h, dim),
                surface_id: domain.kind().to_string(),
                weight: 0.0,
            })
        }
        Shape::Polygon { .. } | Shape::Cuboid { .. } => Err(Error::UnsupportedKind {
            op: "principal_curvatures",
            kind: domain.kind().to_string(),
        }),
        Shape::Complement { of } => {
            let s = principal_curvatures_tol(of, xi, tol)?;
            Ok(s.flipped().relabel(domain.kind()))
        }
        _ => Ok(fd_curvatures(domain, xi)),
    }
}

/// Curvatures from central differences of the level function; used for the
/// composite and implicit kinds.
fn fd_curvatures(domain: &DomainSpec, xi: &Point) -> SurfaceSample {
    let dim = domain.dim();
    let eta = 1e-4 * domain.length_scale().clamp(1e-2, 1e2);
    let f = |p: &Point| domain.level(p);
    let f0 = f(xi);
    let mut g = [0.0; 3];
    let mut h = [[0.0; 3]; 3];
    for a in 0..dim {
        let mut p = *xi;
        let mut m = *xi;
        p[a] += eta;
        m[a] -= eta;
        let (fp, fm) = (f(&p), f(&m));
        g[a] = (fp - fm) / (2.0 * eta);
        h[a][a] = (fp - 2.0 * f0 + fm) / (eta * eta);
        for b in a + 1..dim {
            let mut pp = *xi;
            let mut pm = *xi;
            let mut mp = *xi;
            let mut mm = *xi;
            pp[a] += eta;
            pp[b] += eta;
            pm[a] += eta;
            pm[b] -= eta;
            mp[a] -= eta;
            mp[b] += eta;
            mm[a] -= eta;
            mm[b] -= eta;
            let v = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * eta * eta);
            h[a][b] = v;
            h[b][a] = v;
        }
    }
    let gn = dot(&g, &g).sqrt();
    let n = normalize(&g);
    SurfaceSample {
        point: *xi,
        inward_normal: n,
        curvatures: level_set_curvatures(&n, gn, &h, dim),
        surface_id: domain.kind().to_string(),
        weight: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_and_sphere_curvatures() {
        let d = DomainSpec::ball(&[0.0, 0.0], 2.0).unwrap();
        let s = principal_curvatures(&d, &[0.0, 2.0, 0.0]).unwrap();
        assert_eq!(s.curvatures, vec![0.5]);
        let b = DomainSpec::ball(&[0.0, 0.0, 0.0], 2.0).unwrap();
        let s = principal_curvatures(&b, &[0.0, 0.0, -2.0]).unwrap();
        assert_eq!(s.curvatures, vec![0.5, 0.5]);
    }

    #[test]
    fn ellipse_vertex_curvature_matches_conic_formula() {
        // curvature of x^2/a^2 + y^2/b^2 = 1 at (a, 0) is a / b^2
        let e = DomainSpec::ellipse(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let s = principal_curvatures(&e, &[2.0, 0.0, 0.0]).unwrap();
        assert!((s.curvatures[0] - 2.0).abs() < 1e-12);
        let s = principal_curvatures(&e, &[0.0, 1.0, 0.0]).unwrap();
        assert!((s.curvatures[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn off_surface_point_is_rejected() {
        let d = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            principal_curvatures(&d, &[0.5, 0.0, 0.0]),
            Err(Error::OffSurface { .. })
        ));
    }

    #[test]
    fn composite_kinds_use_differences() {
        // parallel body of an ellipse: curvature a/b^2 transforms to k / (1 + R k)
        let e = DomainSpec::ellipse(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let p = super::super::parallel_body(&e, 0.5).unwrap();
        let s = principal_curvatures_tol(&p, &[2.5, 0.0, 0.0], 1e-9).unwrap();
        assert!((s.curvatures[0] - 2.0 / 2.0).abs() < 1e-5, "{:?}", s.curvatures);
        // annulus inner circle is concave seen from inside
        let a = DomainSpec::annulus(&[0.0, 0.0], 1.0, 2.0).unwrap();
        let s = principal_curvatures(&a, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.curvatures, vec![-1.0]);
        assert_eq!(s.inward_normal, [1.0, 0.0, 0.0]);
    }
}
