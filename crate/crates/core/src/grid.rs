//! Periodic uniform grids over `[-L, L)^d` and the real fields sampled on them.
//!
//! Node `i` along an axis sits at `-L + i h` with `h = 2L / M`. Every
//! quadrature (integrals and `L^p` norms) is the midpoint rule with one cell
//! of volume `h^d` per node.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, KsError, Result};

/// Geometry of a periodic grid with `M` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    m: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(d: usize, m: usize, half_width: f64) -> Result<Self> {
        if d == 0 || d > 3 {
            return Err(KsError::UnsupportedDimension(d));
        }
        if m < 2 || !m.is_power_of_two() {
            return Err(invalid("grid.m", format!("{m} is not a power of two >= 2")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("grid.l", "half width must be positive"));
        }
        Ok(Self { d, m, half_width })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Nodes per axis.
    pub fn side(&self) -> usize {
        self.m
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.m as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Multi-index of a flat index; the last axis varies fastest.
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for k in (0..self.d).rev() {
            out[k] = flat % self.m;
            flat /= self.m;
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    /// Physical position of the node with flat index `flat`.
    pub fn position(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.unflatten(flat, &mut idx[..self.d]);
        for k in 0..self.d {
            out[k] = self.coord(idx[k]);
        }
    }

    /// Same grid with twice the nodes per axis.
    pub fn refined(&self) -> Self {
        Self {
            m: self.m * 2,
            ..*self
        }
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> GridField {
        let mut x = [0.0; 3];
        let values = (0..self.len())
            .map(|i| {
                self.position(i, &mut x);
                f(&x[..self.d])
            })
            .collect();
        GridField {
            grid: *self,
            values,
        }
    }
}

/// A real field sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KsError::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    /// `L^p` norm; `p = inf` gives the sup norm.
    pub fn norm_lp(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.norm_linf();
        }
        if p == 1.0 {
            return self.norm_l1();
        }
        // scale by the max to keep high powers in range
        let scale = self.norm_linf();
        if scale == 0.0 {
            return 0.0;
        }
        let s: f64 = self.values.iter().map(|v| (v.abs() / scale).powf(p)).sum();
        scale * (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        if self.grid != other.grid {
            return Err(KsError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(GridField {
            grid: self.grid,
            values,
        })
    }

    /// Keeps every other node per axis, landing on the grid with half the side.
    pub fn subsample(&self) -> Result<GridField> {
        let coarse = Grid::new(self.grid.d, self.grid.m / 2, self.grid.half_width)?;
        let mut idx = [0usize; 3];
        let d = self.grid.d;
        let values = (0..coarse.len())
            .map(|i| {
                coarse.unflatten(i, &mut idx[..d]);
                for k in idx[..d].iter_mut() {
                    *k *= 2;
                }
                self.values[self.grid.flatten(&idx[..d])]
            })
            .collect();
        Ok(GridField {
            grid: coarse,
            values,
        })
    }

    /// Multilinear interpolation; zero outside the sampled box (no wrapping).
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let d = g.d;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..d {
            let s = (x[k] + g.half_width) / h;
            if !(s >= 0.0 && s <= (g.m - 1) as f64) {
                return 0.0;
            }
            let i = (s.floor() as usize).min(g.m - 2);
            base[k] = i;
            frac[k] = s - i as f64;
        }
        let mut acc = 0.0;
        let mut idx = [0usize; 3];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                idx[k] = base[k] + bit;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            acc += w * self.values[g.flatten(&idx[..d])];
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid::new(2, 100, 1.0).is_err());
        assert!(Grid::new(4, 8, 1.0).is_err());
        assert!(Grid::new(2, 64, 0.0).is_err());
    }

    #[test]
    fn flatten_roundtrip_and_coords() {
        let g = Grid::new(3, 8, 2.0).unwrap();
        let mut idx = [0; 3];
        for flat in [0, 7, 8, 63, 511] {
            g.unflatten(flat, &mut idx);
            assert_eq!(g.flatten(&idx), flat);
        }
        assert_eq!(g.coord(0), -2.0);
        assert_eq!(g.coord(4), 0.0);
    }

    #[test]
    fn norms_of_indicator_block() {
        // unit-volume block of height 3 on [-2,2)^2
        let g = Grid::new(2, 64, 2.0).unwrap();
        let f = g.sample(|x| {
            if x.iter().all(|&c| (-0.5..0.5).contains(&c)) {
                3.0
            } else {
                0.0
            }
        });
        assert!((f.norm_l1() - 3.0).abs() < 1e-12);
        assert!((f.norm_lp(4.0) - 3.0).abs() < 1e-12);
        assert_eq!(f.norm_linf(), 3.0);
    }

    #[test]
    fn interpolation_is_exact_on_linear_functions() {
        let g = Grid::new(2, 32, 1.0).unwrap();
        let f = g.sample(|x| 2.0 * x[0] - x[1] + 0.5);
        let v = f.interpolate(&[0.123, -0.377]);
        assert!((v - (2.0 * 0.123 + 0.377 + 0.5)).abs() < 1e-12);
        assert_eq!(f.interpolate(&[1.5, 0.0]), 0.0);
    }
}
