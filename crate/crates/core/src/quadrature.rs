//! Adaptive Gauss–Kronrod integration and quadrature layouts on spheres.

use crate::error::{Error, Result};
use crate::geometry::Point;

// Kronrod 15-point abscissae and weights; the odd entries (1, 3, 5, 7) are
// the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * hl, ((kronrod - gauss) * hl).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by global
/// bisection of the worst Gauss–Kronrod panel.
///
/// Panels are processed in a fixed order, so repeated calls are bit-identical.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut panels = vec![{
        let (v, e) = gk15(&f, lo, hi);
        (lo, hi, v, e)
    }];
    for _ in 0..20_000 {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            let value: f64 = panels.iter().map(|p| p.2).sum();
            return Ok(sign * value);
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        if !(mid > pa && mid < pb) {
            break;
        }
        let (v1, e1) = gk15(&f, pa, mid);
        let (v2, e2) = gk15(&f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
    let total_err: f64 = panels.iter().map(|p| p.3).sum();
    Err(Error::Solver(format!(
        "adaptive quadrature on [{a}, {b}] stalled at error estimate {total_err:e} (tolerance {tol:e})"
    )))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Quadrature nodes `(unit direction, weight)` on the unit sphere `S^{N-1}`,
/// with weights summing to `|S^{N-1}|`. Antipodally symmetric in every dimension.
///
/// * N = 1: the two points `±1`, weight 1 each.
/// * N = 2: trapezoidal rule with `n` equally spaced angles.
/// * N = 3: product of Gauss–Legendre in `cos θ` (n/2 nodes) and the
///   trapezoidal rule in azimuth (n nodes).
pub fn unit_sphere_rule(dim: usize, n: usize) -> Vec<(Point, f64)> {
    use std::f64::consts::PI;
    match dim {
        1 => vec![([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)],
        2 => {
            let n = n.max(4);
            (0..n)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    ([th.cos(), th.sin(), 0.0], 2.0 * PI / n as f64)
                })
                .collect()
        }
        _ => {
            let n_az = n.max(8);
            let n_pol = (n_az / 2).max(4);
            let (zs, ws) = gauss_legendre(n_pol);
            let mut out = Vec::with_capacity(n_az * n_pol);
            for (z, wz) in zs.iter().zip(&ws) {
                let s = (1.0 - z * z).max(0.0).sqrt();
                for k in 0..n_az {
                    let ph = 2.0 * PI * k as f64 / n_az as f64;
                    out.push(([s * ph.cos(), s * ph.sin(), *z], wz * 2.0 * PI / n_az as f64));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_singular_endpoints() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-11).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
        let v = integrate(|x: f64| 1.0 / x, 2.0, 1.0, 1e-12).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_matches_known_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(20);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((s - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_rules_integrate_low_moments() {
        for dim in 2..=3 {
            let rule = unit_sphere_rule(dim, 64);
            let area: f64 = rule.iter().map(|r| r.1).sum();
            let expect = if dim == 2 { 2.0 * std::f64::consts::PI } else { 4.0 * std::f64::consts::PI };
            assert!((area - expect).abs() < 1e-12);
            // <x_0^2> over the sphere equals area / N
            let m2: f64 = rule.iter().map(|r| r.1 * r.0[0] * r.0[0]).sum();
            assert!((m2 - expect / dim as f64).abs() < 1e-12);
        }
    }
}
