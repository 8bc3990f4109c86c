use rayon::prelude::*;

use crate::geometry::{axpy, sub, DomainSpec, Point};
use crate::grid::GridSpec;
use crate::nonlinearity::Nonlinearity;

pub(crate) const NONE: u32 = u32::MAX;

/// Discrete operator `L psi` acting on `psi = phi(u)` over the unknown nodes.
///
/// Each unknown has up to `2N` links. A link to another unknown has weight
/// `1/h^2`; a link crossing the boundary at fraction `theta` of the edge has
/// weight `1/(theta h^2)` and contributes `phi(1)` to the constant term; a
/// link to a fixed box-edge node contributes its value likewise. The matrix
/// is symmetric.
pub(crate) struct Operator {
    /// Grid index of each unknown.
    pub nodes: Vec<usize>,
    pub nbr: Vec<[u32; 6]>,
    pub w: Vec<[f64; 6]>,
    pub diag: Vec<f64>,
    /// Constant part of `L psi` from boundary and fixed nodes.
    pub b: Vec<f64>,
    pub links: usize,
}

/// Fraction of the edge from `a` (inside) to `b` (outside) at which the
/// level function vanishes, by the Illinois variant of regula falsi.
pub(crate) fn cut_fraction(domain: &DomainSpec, a: &Point, b: &Point) -> f64 {
    let d = sub(b, a);
    let f = |s: f64| domain.level(&axpy(a, s, &d));
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut flo, mut fhi) = (f(0.0), f(1.0));
    if fhi >= 0.0 {
        return 1.0;
    }
    let mut side = 0;
    for _ in 0..60 {
        let s = (lo * fhi - hi * flo) / (fhi - flo);
        let fs = f(s);
        if fs.abs() < 1e-15 || hi - lo < 1e-15 {
            return s;
        }
        if fs > 0.0 {
            lo = s;
            flo = fs;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = s;
            fhi = fs;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
    }
    0.5 * (lo + hi)
}

impl Operator {
    /// `inside[i]` marks nodes carrying the equation; `fixed` gives the value
    /// of non-unknown nodes. With `domain` set, links from an unknown to a
    /// node outside the domain are cut links with boundary value 1.
    pub fn assemble(
        grid: &GridSpec,
        n: &Nonlinearity,
        unknown: &[bool],
        fixed: &[f64],
        domain: Option<&DomainSpec>,
        theta_min: f64,
    ) -> Self {
        let dim = grid.dim();
        let mut slot = vec![NONE; grid.node_count()];
        let mut nodes = Vec::new();
        for (i, &u) in unknown.iter().enumerate() {
            if u {
                slot[i] = nodes.len() as u32;
                nodes.push(i);
            }
        }
        let phi_one = n.phi(1.0);
        let rows: Vec<([u32; 6], [f64; 6], f64, f64, usize)> = nodes
            .par_iter()
            .map(|&i| {
                let mut nb = [NONE; 6];
                let mut w = [0.0; 6];
                let mut diag = 0.0;
                let mut b = 0.0;
                let mut links = 0;
                let neighbours = grid.neighbors(i);
                for k in 0..2 * dim {
                    let Some(j) = neighbours[k] else { continue };
                    let h = grid.spacing[k / 2];
                    links += 1;
                    if slot[j] != NONE {
                        nb[k] = slot[j];
                        w[k] = 1.0 / (h * h);
                        diag += w[k];
                        continue;
                    }
                    match domain {
                        Some(d) if !(d.level(&grid.coord(j)) > 0.0) => {
                            let theta = cut_fraction(d, &grid.coord(i), &grid.coord(j)).max(theta_min);
                            let wk = 1.0 / (theta * h * h);
                            w[k] = wk;
                            diag += wk;
                            b += wk * phi_one;
                        }
                        _ => {
                            let wk = 1.0 / (h * h);
                            w[k] = wk;
                            diag += wk;
                            b += wk * n.phi(fixed[j]);
                        }
                    }
                }
                (nb, w, diag, b, links)
            })
            .collect();
        let mut op = Operator {
            nodes,
            nbr: Vec::with_capacity(rows.len()),
            w: Vec::with_capacity(rows.len()),
            diag: Vec::with_capacity(rows.len()),
            b: Vec::with_capacity(rows.len()),
            links: 0,
        };
        for (nb, w, d, b, l) in rows {
            op.nbr.push(nb);
            op.w.push(w);
            op.diag.push(d);
            op.b.push(b);
            op.links += l;
        }
        op
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Off-diagonal part of `L` applied to `psi`: `sum_k w_k psi_{nb_k}`.
    #[inline]
    pub fn offdiag(&self, r: usize, psi: &[f64]) -> f64 {
        let nb = &self.nbr[r];
        let w = &self.w[r];
        let mut s = 0.0;
        for k in 0..6 {
            if nb[k] != NONE {
                s += w[k] * psi[nb[k] as usize];
            }
        }
        s
    }
}
