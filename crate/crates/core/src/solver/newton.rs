use rayon::prelude::*;

use super::operator::{Operator, NONE};
use super::{SolverOptions, SolverStats};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::nonlinearity::Nonlinearity;

const CHUNK: usize = 4096;

/// Dot product with a fixed chunking, so the result does not depend on the
/// thread count.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Jacobi-preconditioned CG for `(D + dt diag_w - dt W) x = rhs` where `D`
/// is the diagonal `dinv`. Returns the iteration count.
fn cg(op: &Operator, dinv: &[f64], dt: f64, rhs: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> usize {
    let n = op.len();
    let apply = |p: &[f64], out: &mut [f64]| {
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            *o = (dinv[r] + dt * op.diag[r]) * p[r] - dt * op.offdiag(r, p);
        });
    };
    let m: Vec<f64> = (0..n).map(|r| 1.0 / (dinv[r] + dt * op.diag[r])).collect();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = rhs.to_vec();
    let stop = rel_tol * dot(rhs, rhs).sqrt();
    if stop == 0.0 {
        return 0;
    }
    let mut z: Vec<f64> = r.iter().zip(&m).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        if dot(&r, &r).sqrt() <= stop {
            return it;
        }
        z.par_iter_mut().zip(&r).zip(&m).for_each(|((zi, ri), mi)| *zi = ri * mi);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    max_iter
}

fn residual(op: &Operator, n: &Nonlinearity, u: &[f64], u_old: &[f64], dt: f64, r: &mut [f64]) -> f64 {
    let psi: Vec<f64> = u.par_iter().map(|&v| n.phi(v)).collect();
    r.par_iter_mut().enumerate().for_each(|(i, ri)| {
        *ri = u[i] - u_old[i] - dt * (op.offdiag(i, &psi) - op.diag[i] * psi[i] + op.b[i]);
    });
    r.par_chunks(CHUNK)
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// One backward-Euler step on the unknowns, starting from `u` (updated in place).
pub(crate) fn newton_step(
    op: &Operator,
    n: &Nonlinearity,
    u_old: &[f64],
    u: &mut [f64],
    dt: f64,
    t: f64,
    opts: &SolverOptions,
    stats: &mut SolverStats,
) -> Result<()> {
    let len = op.len();
    let mut r = vec![0.0; len];
    let mut dpsi = vec![0.0; len];
    let mut rmax = residual(op, n, u, u_old, dt, &mut r);
    let mut iters = 0;
    while rmax > opts.newton_tol {
        if iters == opts.newton_max {
            return Err(Error::Solver(format!(
                "Newton did not converge at t = {t:e} (dt = {dt:e}) after {iters} iterations; \
                 max residual {rmax:e} > {:e}",
                opts.newton_tol
            )));
        }
        let dinv: Vec<f64> = u.par_iter().map(|&v| 1.0 / n.phi_prime(v)).collect();
        r.par_iter_mut().for_each(|v| *v = -*v);
        stats.cg_iterations += cg(op, &dinv, dt, &r, &mut dpsi, opts.cg_rel_tol, 20 * len.max(50)) as u64;
        u.par_iter_mut()
            .zip(&dpsi)
            .zip(&dinv)
            .for_each(|((ui, d), di)| *ui += d * di);
        iters += 1;
        rmax = residual(op, n, u, u_old, dt, &mut r);
    }
    stats.newton_iterations += iters as u64;
    Ok(())
}

/// Solves `u + c phi(u) = s` for `u >= 0` given `s >= 0`.
fn scalar_solve(n: &Nonlinearity, c: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if n.is_identity() {
        return s / (1.0 + c);
    }
    let (mut lo, mut hi) = (0.0, s);
    let mut u = s / (1.0 + c * n.phi_prime(0.0));
    for _ in 0..60 {
        let g = u + c * n.phi(u) - s;
        if g > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let mut next = u - g / (1.0 + c * n.phi_prime(u));
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-16 * next {
            return next;
        }
        u = next;
    }
    u
}

/// Row segments of the unknown list, grouped into planes, for ordered sweeps.
pub(crate) struct SweepLayout {
    rows: Vec<(usize, usize)>,
    planes: Vec<(usize, usize)>,
    dim: usize,
}

impl SweepLayout {
    pub fn new(grid: &GridSpec, op: &Operator) -> Self {
        let mut rows = Vec::new();
        let mut planes = Vec::new();
        let mut start = 0;
        let mut plane_start = 0;
        let key = |idx: usize| {
            let ijk = grid.multi_index(idx);
            (ijk[2], ijk[1])
        };
        for r in 1..=op.len() {
            if r == op.len() || key(op.nodes[r]) != key(op.nodes[start]) {
                rows.push((start, r));
                let done = r == op.len() || key(op.nodes[r]).0 != key(op.nodes[start]).0;
                if done {
                    planes.push((plane_start, rows.len()));
                    plane_start = rows.len();
                }
                start = r;
            }
        }
        Self {
            rows,
            planes,
            dim: grid.dim(),
        }
    }

    fn visit(&self, mask: usize, mut f: impl FnMut(usize)) {
        let planes: Box<dyn Iterator<Item = &(usize, usize)>> = if mask & 4 != 0 {
            Box::new(self.planes.iter().rev())
        } else {
            Box::new(self.planes.iter())
        };
        for &(p0, p1) in planes {
            let rows = &self.rows[p0..p1];
            let rows: Box<dyn Iterator<Item = &(usize, usize)>> = if mask & 2 != 0 {
                Box::new(rows.iter().rev())
            } else {
                Box::new(rows.iter())
            };
            for &(a, b) in rows {
                if mask & 1 != 0 {
                    (a..b).rev().for_each(&mut f);
                } else {
                    (a..b).for_each(&mut f);
                }
            }
        }
    }
}

/// Re-solves the step equations on nodes with small values by nonlinear
/// Gauss–Seidel sweeps in all axis orderings. Every update is a sum of
/// nonnegative terms, so small values keep full relative precision, which
/// the global solve cannot guarantee.
pub(crate) fn polish_tail(
    op: &Operator,
    layout: &SweepLayout,
    n: &Nonlinearity,
    u_old: &[f64],
    u: &mut [f64],
    dt: f64,
    opts: &SolverOptions,
    stats: &mut SolverStats,
) {
    let tail: Vec<bool> = u.iter().map(|&v| v < opts.polish_threshold).collect();
    if !tail.iter().any(|&b| b) {
        return;
    }
    for (i, v) in u.iter_mut().enumerate() {
        if tail[i] {
            *v = u_old[i].max(0.0);
        }
    }
    let mut psi: Vec<f64> = u.iter().map(|&v| n.phi(v)).collect();
    for _round in 0..opts.polish_max_rounds {
        stats.polish_rounds += 1;
        let mut change: f64 = 0.0;
        for mask in 0..(1usize << layout.dim) {
            change = 0.0;
            layout.visit(mask, |r| {
                if !tail[r] {
                    return;
                }
                let nb = &op.nbr[r];
                let w = &op.w[r];
                let mut s = op.b[r];
                for k in 0..6 {
                    if nb[k] != NONE {
                        s += w[k] * psi[nb[k] as usize];
                    }
                }
                let v = scalar_solve(n, dt * op.diag[r], u_old[r].max(0.0) + dt * s);
                let prev = u[r];
                if v > 0.0 {
                    change = change.max((v - prev).abs() / v);
                }
                u[r] = v;
                psi[r] = n.phi(v);
            });
        }
        if change < opts.polish_tol {
            break;
        }
    }
}
