//! Sphere integrals behind the two balance laws.

use crate::error::{Error, Result};
use crate::geometry::{axpy, Point};
use crate::grid::GridSpec;
use crate::quadrature::unit_sphere_rule;
use crate::solver::{ProblemKind, SolutionSeries};

/// Angular nodes per sphere (trapezoidal in 2D; azimuth count in 3D).
pub const SPHERE_NODES: usize = 256;

fn check_ball(series: &SolutionSeries, x0: &Point, r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::Geometry(format!("sphere radius must be > 0, got {r}")));
    }
    if series.problem == ProblemKind::Ibvp {
        let d = series.domain.level(x0);
        if !(r < d) {
            return Err(Error::Geometry(format!(
                "sphere of radius {r} at {x0:?} leaves the domain (distance to boundary {d})"
            )));
        }
    }
    Ok(())
}

/// `int_{dB_r(x0)} f dS` for a field sampled on `grid`, with `f` given per
/// node value and offset `y = x - x0`.
pub fn sphere_integral<F>(grid: &GridSpec, field: &[f64], x0: &Point, r: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Point, f64) -> Vec<f64>,
{
    let dim = grid.dim();
    let rule = unit_sphere_rule(dim, SPHERE_NODES);
    let jac = r.powi(dim as i32 - 1);
    let mut acc: Vec<f64> = Vec::new();
    for (dir, w) in rule {
        let y = [r * dir[0], r * dir[1], r * dir[2]];
        let x = axpy(x0, 1.0, &y);
        let u = grid
            .interpolate(field, &x)
            .ok_or_else(|| Error::Geometry(format!("sphere point {x:?} lies outside the grid")))?;
        let v = f(&y, u);
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, b) in acc.iter_mut().zip(v) {
            *a += w * jac * b;
        }
    }
    Ok(acc)
}

/// `int_{dB_r} (x - x0) u dS` for a raw field.
pub fn moment_of_field(grid: &GridSpec, field: &[f64], x0: &Point, r: f64) -> Result<Vec<f64>> {
    let dim = grid.dim();
    sphere_integral(grid, field, x0, r, |y, u| (0..dim).map(|a| y[a] * u).collect())
}

/// `int_{dB_r} u dS` for a raw field.
pub fn mean_of_field(grid: &GridSpec, field: &[f64], x0: &Point, r: f64) -> Result<f64> {
    Ok(sphere_integral(grid, field, x0, r, |_, u| vec![u])?[0])
}

/// First-moment balance `int_{dB_r(x0)} (x - x0) u(x, t) dS`.
pub fn moment_balance(series: &SolutionSeries, x0: &Point, r: f64, t: f64) -> Result<Vec<f64>> {
    check_ball(series, x0, r)?;
    moment_of_field(&series.grid, &series.snapshot(t)?.field, x0, r)
}

/// Mean balance `int_{dB_r(x0)} u(x, t) dS`.
pub fn mean_balance(series: &SolutionSeries, x0: &Point, r: f64, t: f64) -> Result<f64> {
    check_ball(series, x0, r)?;
    mean_of_field(&series.grid, &series.snapshot(t)?.field, x0, r)
}

/// Mean balance of the difference field `v(y) = u(p + y, t) - u(q + y, t)`
/// over the sphere `|y| = r`.
pub fn difference_mean_balance(series: &SolutionSeries, p: &Point, q: &Point, r: f64, t: f64) -> Result<f64> {
    check_ball(series, p, r)?;
    check_ball(series, q, r)?;
    let field = &series.snapshot(t)?.field;
    let grid = &series.grid;
    let rule = unit_sphere_rule(grid.dim(), SPHERE_NODES);
    let jac = r.powi(grid.dim() as i32 - 1);
    let mut s = 0.0;
    for (dir, w) in rule {
        let y = [r * dir[0], r * dir[1], r * dir[2]];
        let at = |c: &Point| {
            let x = axpy(c, 1.0, &y);
            grid.interpolate(field, &x)
                .ok_or_else(|| Error::Geometry(format!("sphere point {x:?} lies outside the grid")))
        };
        s += w * jac * (at(p)? - at(q)?);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square(h: f64) -> GridSpec {
        GridSpec::covering(&[-1.0, -1.0], &[1.0, 1.0], h, 0.0).unwrap()
    }

    #[test]
    fn constant_and_linear_fields() {
        let g = square(1.0 / 32.0);
        let ones = vec![1.0; g.node_count()];
        let r = 0.5;
        assert!((mean_of_field(&g, &ones, &[0.1, 0.0, 0.0], r).unwrap() - 2.0 * PI * r).abs() < 1e-10);
        let x1: Vec<f64> = (0..g.node_count()).map(|i| g.coord(i)[0]).collect();
        let m = moment_of_field(&g, &x1, &[0.0; 3], r).unwrap();
        // int (y1)^2 dS = r * |dB_r| / N
        assert!((m[0] - r * r * 2.0 * PI * r / 2.0).abs() < 1e-10);
        assert!(m[1].abs() < 1e-12);
    }

    #[test]
    fn radial_field_has_no_moment() {
        let g = square(1.0 / 32.0);
        let f: Vec<f64> = (0..g.node_count())
            .map(|i| {
                let x = g.coord(i);
                (-(x[0] * x[0] + x[1] * x[1])).exp()
            })
            .collect();
        let m = moment_of_field(&g, &f, &[0.0; 3], 0.7).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-12));
    }
}
