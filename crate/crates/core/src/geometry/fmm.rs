use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::grid::GridSpec;

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on distance, ties broken by index for determinism
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Solves `sum_a max(0, (T - T_a) / h_a)^2 = 1` for the upwind values `T_a`.
fn upwind_update(mut terms: Vec<(f64, f64)>) -> f64 {
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = f64::INFINITY;
    for m in 1..=terms.len() {
        let (mut a, mut b, mut c) = (0.0, 0.0, -1.0);
        for &(t, h) in &terms[..m] {
            let w = 1.0 / (h * h);
            a += w;
            b -= 2.0 * t * w;
            c += t * t * w;
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            break;
        }
        let root = (-b + disc.sqrt()) / (2.0 * a);
        if m == terms.len() || root <= terms[m].0 {
            best = root;
            break;
        }
        best = root;
    }
    best
}

/// Signed distance to the zero set of `phi` by first-order fast marching.
///
/// Nodes next to a sign change are initialized from linear interpolation of
/// `phi` along each grid edge; the sign of `phi` is restored at the end.
pub fn fast_marching(grid: &GridSpec, phi: &[f64]) -> Vec<f64> {
    let n = grid.node_count();
    let dim = grid.dim();
    let mut dist = vec![f64::INFINITY; n];
    let mut frozen = vec![false; n];
    for i in 0..n {
        let nb = grid.neighbors(i);
        let mut inv2 = 0.0;
        for a in 0..dim {
            let mut da = f64::INFINITY;
            for j in [nb[2 * a], nb[2 * a + 1]].into_iter().flatten() {
                if (phi[i] > 0.0) != (phi[j] > 0.0) {
                    let theta = phi[i] / (phi[i] - phi[j]);
                    da = da.min(theta.abs() * grid.spacing[a]);
                }
            }
            if da.is_finite() {
                inv2 += 1.0 / (da * da).max(1e-300);
            }
        }
        if inv2 > 0.0 {
            dist[i] = 1.0 / inv2.sqrt();
            frozen[i] = true;
        }
    }
    let mut heap = BinaryHeap::new();
    let push_neighbors = |i: usize, dist: &mut Vec<f64>, frozen: &Vec<bool>, heap: &mut BinaryHeap<Entry>| {
        for j in grid.neighbors(i).into_iter().flatten() {
            if frozen[j] {
                continue;
            }
            let nb = grid.neighbors(j);
            let mut terms = Vec::with_capacity(dim);
            for a in 0..dim {
                let t = [nb[2 * a], nb[2 * a + 1]]
                    .into_iter()
                    .flatten()
                    .filter(|&k| frozen[k])
                    .map(|k| dist[k])
                    .fold(f64::INFINITY, f64::min);
                if t.is_finite() {
                    terms.push((t, grid.spacing[a]));
                }
            }
            let cand = upwind_update(terms);
            if cand < dist[j] {
                dist[j] = cand;
                heap.push(Entry { dist: cand, idx: j });
            }
        }
    };
    for i in 0..n {
        if frozen[i] {
            push_neighbors(i, &mut dist, &frozen, &mut heap);
        }
    }
    while let Some(Entry { dist: d, idx }) = heap.pop() {
        if frozen[idx] || d > dist[idx] {
            continue;
        }
        frozen[idx] = true;
        push_neighbors(idx, &mut dist, &frozen, &mut heap);
    }
    dist.iter()
        .zip(phi)
        .map(|(d, p)| if *p > 0.0 { *d } else { -*d })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_circle_distance() {
        let g = GridSpec::covering(&[-1.0, -1.0], &[1.0, 1.0], 1.0 / 64.0, 0.25).unwrap();
        // a level function with the right zero set but the wrong gradient
        let phi: Vec<f64> = (0..g.node_count())
            .map(|i| {
                let x = g.coord(i);
                1.0 - (x[0] * x[0] + x[1] * x[1])
            })
            .collect();
        let d = fast_marching(&g, &phi);
        let mut err: f64 = 0.0;
        for i in 0..g.node_count() {
            let x = g.coord(i);
            let exact = 1.0 - x[0].hypot(x[1]);
            if exact.abs() < 0.5 {
                err = err.max((d[i] - exact).abs());
            }
        }
        assert!(err < 0.02, "{err}");
    }

    #[test]
    fn plane_is_exact() {
        let g = GridSpec::covering(&[0.0, 0.0], &[1.0, 1.0], 0.1, 0.0).unwrap();
        let phi: Vec<f64> = (0..g.node_count()).map(|i| g.coord(i)[0] - 0.55).collect();
        let d = fast_marching(&g, &phi);
        for i in 0..g.node_count() {
            assert!((d[i] - phi[i]).abs() < 1e-12);
        }
    }
}
