//! Uniform Cartesian grids in one to three dimensions.
//!
//! Node `(i, j, k)` sits at `origin + (i h_x, j h_y, k h_z)`; flat storage puts
//! axis 0 fastest, so a 2D field is a row-major `[y][x]` array.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    /// Cell counts per axis; there are `extents[a] + 1` nodes along axis `a`.
    pub extents: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, extents: Vec<usize>) -> Result<Self> {
        let grid = Self {
            origin,
            spacing,
            extents,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Uniform grid of spacing `h` covering `[lo - margin, hi + margin]`.
    ///
    /// The box is widened symmetrically to an even number of cells, so the
    /// centre of the requested box is a grid node.
    pub fn covering(lo: &[f64], hi: &[f64], h: f64, margin: f64) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Config("bounding box corners differ in dimension".into()));
        }
        if !(h > 0.0) {
            return Err(Error::Config(format!("spacing must be > 0, got {h}")));
        }
        let mut origin = Vec::with_capacity(lo.len());
        let mut extents = Vec::with_capacity(lo.len());
        for (a, b) in lo.iter().zip(hi) {
            let len = (b - a) + 2.0 * margin;
            let mut cells = ((len / h) - 1e-9).ceil().max(2.0) as usize;
            cells += cells % 2;
            let mid = 0.5 * (a + b);
            origin.push(mid - 0.5 * cells as f64 * h);
            extents.push(cells);
        }
        Self::new(origin, vec![h; lo.len()], extents)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.origin.len();
        if !(1..=3).contains(&n) {
            return Err(Error::Config(format!("grid dimension must be 1, 2 or 3, got {n}")));
        }
        if self.spacing.len() != n || self.extents.len() != n {
            return Err(Error::Config("grid origin, spacing and extents differ in length".into()));
        }
        for (a, (&h, &e)) in self.spacing.iter().zip(&self.extents).enumerate() {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Config(format!("grid.spacing[{a}] must be > 0")));
            }
            if e < 2 {
                return Err(Error::Config(format!("grid.extents[{a}] must be >= 2")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn nodes_along(&self, axis: usize) -> usize {
        if axis < self.dim() {
            self.extents[axis] + 1
        } else {
            1
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.nodes_along(0), self.nodes_along(1), self.nodes_along(2)]
    }

    pub fn node_count(&self) -> usize {
        let s = self.shape();
        s[0] * s[1] * s[2]
    }

    pub fn strides(&self) -> [usize; 3] {
        let s = self.shape();
        [1, s[0], s[0] * s[1]]
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        let s = self.strides();
        ijk[0] * s[0] + ijk[1] * s[1] + ijk[2] * s[2]
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let s = self.shape();
        let i = idx % s[0];
        idx /= s[0];
        let j = idx % s[1];
        idx /= s[1];
        [i, j, idx]
    }

    pub fn coord_of(&self, ijk: [usize; 3]) -> Point {
        let mut p = [0.0; 3];
        for a in 0..self.dim() {
            p[a] = self.origin[a] + ijk[a] as f64 * self.spacing[a];
        }
        p
    }

    pub fn coord(&self, idx: usize) -> Point {
        self.coord_of(self.multi_index(idx))
    }

    pub fn lower(&self) -> Point {
        let mut p = [0.0; 3];
        p[..self.dim()].copy_from_slice(&self.origin);
        p
    }

    pub fn upper(&self) -> Point {
        let mut p = [0.0; 3];
        for a in 0..self.dim() {
            p[a] = self.origin[a] + self.extents[a] as f64 * self.spacing[a];
        }
        p
    }

    /// Whether `x` lies in the closed grid box (with a relative slack of 1e-12 cells).
    pub fn contains(&self, x: &Point) -> bool {
        (0..self.dim()).all(|a| {
            let s = (x[a] - self.origin[a]) / self.spacing[a];
            s >= -1e-12 && s <= self.extents[a] as f64 + 1e-12
        })
    }

    /// Cell containing `x` and the local coordinates in `[0, 1]` within it.
    pub fn locate(&self, x: &Point) -> Option<([usize; 3], [f64; 3])> {
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..self.dim() {
            let s = (x[a] - self.origin[a]) / self.spacing[a];
            let n = self.extents[a] as f64;
            if !(s >= -1e-12 && s <= n + 1e-12) {
                return None;
            }
            let s = s.clamp(0.0, n);
            let c = (s.floor() as usize).min(self.extents[a] - 1);
            cell[a] = c;
            frac[a] = s - c as f64;
        }
        Some((cell, frac))
    }

    /// Multilinear interpolation of a nodal field; `None` outside the grid.
    pub fn interpolate(&self, values: &[f64], x: &Point) -> Option<f64> {
        let (cell, frac) = self.locate(x)?;
        let n = self.dim();
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut ijk = cell;
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    ijk[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * values[self.index(ijk)];
            }
        }
        Some(acc)
    }

    /// The same box with every spacing divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            origin: self.origin.clone(),
            spacing: self.spacing.iter().map(|h| h / factor as f64).collect(),
            extents: self.extents.iter().map(|e| e * factor).collect(),
        }
    }

    /// Indices of the axis neighbours of `idx` (`None` past the grid edge),
    /// ordered `[-x, +x, -y, +y, -z, +z]`.
    pub fn neighbors(&self, idx: usize) -> [Option<usize>; 6] {
        let ijk = self.multi_index(idx);
        let s = self.strides();
        let mut out = [None; 6];
        for a in 0..self.dim() {
            if ijk[a] > 0 {
                out[2 * a] = Some(idx - s[a]);
            }
            if ijk[a] < self.extents[a] {
                out[2 * a + 1] = Some(idx + s[a]);
            }
        }
        out
    }

    pub fn is_edge_node(&self, idx: usize) -> bool {
        let ijk = self.multi_index(idx);
        (0..self.dim()).any(|a| ijk[a] == 0 || ijk[a] == self.extents[a])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridDumpHeader {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub extents: Vec<usize>,
    pub field_name: String,
}

/// Writes `<stem>.bin` (little-endian f64, axis 0 fastest) and `<stem>.json`.
pub fn write_grid_dump(
    dir: &Path,
    stem: &str,
    grid: &GridSpec,
    values: &[f64],
    field_name: &str,
) -> Result<(PathBuf, PathBuf)> {
    if values.len() != grid.node_count() {
        return Err(Error::Config(format!(
            "field has {} values but the grid has {} nodes",
            values.len(),
            grid.node_count()
        )));
    }
    fs::create_dir_all(dir)?;
    let bin = dir.join(format!("{stem}.bin"));
    let json = dir.join(format!("{stem}.json"));
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(&bin)?.write_all(&bytes)?;
    let header = GridDumpHeader {
        origin: grid.origin.clone(),
        spacing: grid.spacing.clone(),
        extents: grid.extents.clone(),
        field_name: field_name.to_string(),
    };
    fs::write(&json, serde_json::to_string_pretty(&header)?)?;
    Ok((bin, json))
}

pub fn read_grid_dump(dir: &Path, stem: &str) -> Result<(GridSpec, String, Vec<f64>)> {
    let header: GridDumpHeader =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let grid = GridSpec::new(header.origin, header.spacing, header.extents)?;
    let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
    if bytes.len() != grid.node_count() * 8 {
        return Err(Error::Config(format!(
            "{stem}.bin holds {} bytes, expected {}",
            bytes.len(),
            grid.node_count() * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((grid, header.field_name, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> GridSpec {
        GridSpec::new(vec![-1.0, 0.0], vec![0.5, 0.25], vec![4, 8]).unwrap()
    }

    #[test]
    fn index_round_trip() {
        let g = grid2();
        for idx in 0..g.node_count() {
            assert_eq!(g.index(g.multi_index(idx)), idx);
        }
        assert_eq!(g.node_count(), 5 * 9);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(vec![0.0], vec![0.0], vec![4]).is_err());
        assert!(GridSpec::new(vec![0.0], vec![1.0], vec![1]).is_err());
        assert!(GridSpec::new(vec![0.0; 4], vec![1.0; 4], vec![4; 4]).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_bilinear_fields() {
        let g = grid2();
        let f = |p: &Point| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        let vals: Vec<f64> = (0..g.node_count()).map(|i| f(&g.coord(i))).collect();
        for x in [[-0.3, 1.1, 0.0], [0.99, 0.01, 0.0], [-1.0, 2.0, 0.0]] {
            assert!((g.interpolate(&vals, &x).unwrap() - f(&x)).abs() < 1e-12);
        }
        assert!(g.interpolate(&vals, &[1.5, 0.0, 0.0]).is_none());
    }

    #[test]
    fn covering_grid_is_centred() {
        let g = GridSpec::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.1, 0.05).unwrap();
        assert_eq!(g.extents, vec![22, 22]);
        assert!(g.coord_of([11, 11, 0])[0].abs() < 1e-12);
        let up = g.upper();
        assert!((g.origin[0] + up[0]).abs() < 1e-12);
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid2();
        let vals: Vec<f64> = (0..g.node_count()).map(|i| i as f64 * 0.5).collect();
        write_grid_dump(dir.path(), "u", &g, &vals, "u").unwrap();
        let (g2, name, v2) = read_grid_dump(dir.path(), "u").unwrap();
        assert_eq!(g2, g);
        assert_eq!(name, "u");
        assert_eq!(v2, vals);
    }
}
