use rayon::prelude::*;

use super::fmm::fast_marching;
use super::{DomainSpec, Point};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Nodal samples of the signed distance `d*` (positive inside).
#[derive(Debug, Clone)]
pub struct SignedDistanceField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub domain: DomainSpec,
    /// Half-width of the two-sided band on which `d*` is treated as smooth.
    pub band: Option<f64>,
}

pub fn build_signed_distance(domain: &DomainSpec, grid: &GridSpec) -> Result<SignedDistanceField> {
    build_signed_distance_with_margin(domain, grid, 0.0)
}

/// Like [`build_signed_distance`] but requires the grid to extend `margin`
/// beyond the bounding box of the boundary.
pub fn build_signed_distance_with_margin(
    domain: &DomainSpec,
    grid: &GridSpec,
    margin: f64,
) -> Result<SignedDistanceField> {
    grid.validate()?;
    if grid.dim() != domain.dim() {
        return Err(Error::Config(format!(
            "grid dimension {} does not match domain dimension {}",
            grid.dim(),
            domain.dim()
        )));
    }
    if let Some((lo, hi)) = domain.boundary_bounds() {
        let (glo, ghi) = (grid.lower(), grid.upper());
        let slack = 1e-9 * grid.max_spacing();
        for a in 0..grid.dim() {
            if lo[a] - margin < glo[a] - slack || hi[a] + margin > ghi[a] + slack {
                return Err(Error::Coverage(format!(
                    "axis {a}: boundary spans [{}, {}] (+ margin {margin}) but grid spans [{}, {}]",
                    lo[a], hi[a], glo[a], ghi[a]
                )));
            }
        }
    }
    let level: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|i| domain.level(&grid.coord(i)))
        .collect();
    let values = if domain.is_exact() {
        level
    } else {
        fast_marching(grid, &level)
    };
    Ok(SignedDistanceField {
        grid: grid.clone(),
        values,
        domain: domain.clone(),
        band: None,
    })
}

impl SignedDistanceField {
    pub fn with_band(mut self, rho0: f64) -> Self {
        self.band = Some(rho0);
        self
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Multilinear interpolation; `None` outside the grid.
    pub fn interpolate(&self, x: &Point) -> Option<f64> {
        self.grid.interpolate(&self.values, x)
    }

    /// Value at a point, falling back to the domain level function off the grid.
    pub fn value(&self, x: &Point) -> f64 {
        self.interpolate(x).unwrap_or_else(|| self.domain.level(x))
    }

    fn axis_step(&self, ijk: [usize; 3], a: usize) -> (usize, usize, f64) {
        let lo = if ijk[a] > 0 { ijk[a] - 1 } else { ijk[a] };
        let hi = if ijk[a] < self.grid.extents[a] { ijk[a] + 1 } else { ijk[a] };
        (lo, hi, (hi - lo) as f64 * self.grid.spacing[a])
    }

    fn node_gradient(&self, ijk: [usize; 3]) -> Point {
        let mut g = [0.0; 3];
        for a in 0..self.dim() {
            let (lo, hi, span) = self.axis_step(ijk, a);
            let (mut p, mut m) = (ijk, ijk);
            p[a] = hi;
            m[a] = lo;
            g[a] = (self.values[self.grid.index(p)] - self.values[self.grid.index(m)]) / span;
        }
        g
    }

    fn node_hessian(&self, ijk: [usize; 3]) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        let dim = self.dim();
        let v = |q: [usize; 3]| self.values[self.grid.index(q)];
        for a in 0..dim {
            let mut c = ijk;
            // keep the three-point stencil inside the grid
            c[a] = c[a].clamp(1, self.grid.extents[a] - 1);
            let (mut p, mut m) = (c, c);
            p[a] += 1;
            m[a] -= 1;
            let ha = self.grid.spacing[a];
            h[a][a] = (v(p) - 2.0 * v(c) + v(m)) / (ha * ha);
            for b in a + 1..dim {
                let mut c2 = ijk;
                c2[a] = c2[a].clamp(1, self.grid.extents[a] - 1);
                c2[b] = c2[b].clamp(1, self.grid.extents[b] - 1);
                let hb = self.grid.spacing[b];
                let at = |da: isize, db: isize| {
                    let mut q = c2;
                    q[a] = (q[a] as isize + da) as usize;
                    q[b] = (q[b] as isize + db) as usize;
                    v(q)
                };
                let x = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * ha * hb);
                h[a][b] = x;
                h[b][a] = x;
            }
        }
        h
    }

    fn corners(&self, x: &Point) -> Vec<([usize; 3], f64)> {
        let (cell, frac) = match self.grid.locate(x) {
            Some(c) => c,
            None => return Vec::new(),
        };
        let dim = self.dim();
        (0..1usize << dim)
            .filter_map(|c| {
                let mut w = 1.0;
                let mut ijk = cell;
                for a in 0..dim {
                    if (c >> a) & 1 == 1 {
                        ijk[a] += 1;
                        w *= frac[a];
                    } else {
                        w *= 1.0 - frac[a];
                    }
                }
                (w != 0.0).then_some((ijk, w))
            })
            .collect()
    }

    /// Central-difference gradient, interpolated multilinearly from the nodes.
    /// Zero outside the grid.
    pub fn gradient(&self, x: &Point) -> Point {
        let mut g = [0.0; 3];
        for (ijk, w) in self.corners(x) {
            let gn = self.node_gradient(ijk);
            for a in 0..3 {
                g[a] += w * gn[a];
            }
        }
        g
    }

    /// Central-difference Hessian, interpolated multilinearly from the nodes.
    pub fn hessian(&self, x: &Point) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for (ijk, w) in self.corners(x) {
            let hn = self.node_hessian(ijk);
            for a in 0..3 {
                for b in 0..3 {
                    h[a][b] += w * hn[a][b];
                }
            }
        }
        h
    }

    pub fn node_gradient_norm(&self, idx: usize) -> f64 {
        super::norm(&self.node_gradient(self.grid.multi_index(idx)))
    }

    /// Standard `2N+1`-point Laplacian at an interior node; `None` on the grid edge.
    pub fn laplacian(&self, idx: usize) -> Option<f64> {
        if self.grid.is_edge_node(idx) {
            return None;
        }
        let nb = self.grid.neighbors(idx);
        let mut s = 0.0;
        for a in 0..self.dim() {
            let h = self.grid.spacing[a];
            let (m, p) = (nb[2 * a]?, nb[2 * a + 1]?);
            s += (self.values[p] - 2.0 * self.values[idx] + self.values[m]) / (h * h);
        }
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_values_and_signs() {
        let d = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let g = GridSpec::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.25, 0.5).unwrap();
        let s = build_signed_distance(&d, &g).unwrap();
        let c = g.index([g.extents[0] / 2, g.extents[1] / 2, 0]);
        assert_eq!(s.values[c], 1.0);
        assert!((s.value(&[1.5, 0.0, 0.0]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn coverage_is_checked() {
        let d = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let g = GridSpec::covering(&[-0.5, -0.5], &[0.5, 0.5], 0.1, 0.0).unwrap();
        assert!(matches!(build_signed_distance(&d, &g), Err(Error::Coverage(_))));
    }

    #[test]
    fn marched_ellipse_offset_is_accurate() {
        let e = DomainSpec::ellipse(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let d = DomainSpec::inner_parallel(&e, 0.25).unwrap();
        let g = GridSpec::covering(&[-2.0, -1.0], &[2.0, 1.0], 1.0 / 64.0, 0.1).unwrap();
        let s = build_signed_distance(&d, &g).unwrap();
        // the nearest ellipse point to (1, 0) has cos t = 2/3, at distance sqrt(2/3)
        let v = s.value(&[1.0, 0.0, 0.0]);
        let exact = (2.0f64 / 3.0).sqrt() - 0.25;
        assert!((v - exact).abs() < 0.02, "{v} vs {exact}");
    }
}
