//! FFT machinery on a periodic [`Grid`].
//!
//! Fourier convention `f^(xi) = int e^{-i xi.x} f(x) dx`, so `grad <-> i xi`.
//! Wavenumbers are `xi_k = pi k / L` for `k` in `-M/2 .. M/2`. Odd-order
//! multipliers (gradient, divergence, the kernel `i xi / |xi|^2`) vanish on
//! the Nyquist plane so that real fields stay real.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Grid, GridField};

pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `|xi|^2` per flat index.
    ksq: Vec<f64>,
    /// Odd-safe wavenumber components, `d` per flat index.
    kodd: Vec<f64>,
    /// 2/3-rule mask for quadratic products.
    keep: Vec<bool>,
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let m = grid.side();
        let d = grid.d();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scale = std::f64::consts::PI / grid.half_width();
        let signed = |i: usize| -> i64 {
            if i < m / 2 {
                i as i64
            } else {
                i as i64 - m as i64
            }
        };
        let len = grid.len();
        let mut ksq = Vec::with_capacity(len);
        let mut kodd = Vec::with_capacity(len * d);
        let mut keep = Vec::with_capacity(len);
        let mut idx = [0usize; 3];
        for flat in 0..len {
            grid.unflatten(flat, &mut idx[..d]);
            let mut s = 0.0;
            let mut kept = true;
            for &i in &idx[..d] {
                let k = signed(i);
                let xi = scale * k as f64;
                s += xi * xi;
                kodd.push(if i == m / 2 { 0.0 } else { xi });
                kept &= 3 * k.unsigned_abs() as usize <= m;
            }
            ksq.push(s);
            keep.push(kept);
        }
        Self {
            grid,
            fwd,
            inv,
            ksq,
            kodd,
            keep,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Largest wavenumber magnitude along an axis, `pi / h`.
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI / self.grid.spacing()
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inv } else { &self.fwd };
        let m = self.grid.side();
        let d = self.grid.d();
        let len = data.len();
        // contiguous last axis: rustfft batches consecutive chunks
        fft.process(data);
        let mut scratch = Vec::new();
        for axis in 0..d.saturating_sub(1) {
            let stride = m.pow((d - 1 - axis) as u32);
            let block = m * stride;
            scratch.resize(block, Complex64::default());
            for start in (0..len).step_by(block) {
                let chunk = &mut data[start..start + block];
                for j in 0..stride {
                    for i in 0..m {
                        scratch[j * m + i] = chunk[i * stride + j];
                    }
                }
                fft.process(&mut scratch);
                for j in 0..stride {
                    for i in 0..m {
                        chunk[i * stride + j] = scratch[j * m + i];
                    }
                }
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut c, false);
        c
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse_real(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut c, true);
        let norm = 1.0 / self.grid.len() as f64;
        c.into_iter().map(|z| z.re * norm).collect()
    }

    /// Multiplies by `exp(-|xi|^2 t)`, the symbol of `e^{t Delta}`.
    pub fn apply_heat(&self, c: &mut [Complex64], t: f64) {
        if t == 0.0 {
            return;
        }
        for (z, &k2) in c.iter_mut().zip(&self.ksq) {
            *z *= (-k2 * t).exp();
        }
    }

    pub fn apply_dealias(&self, c: &mut [Complex64]) {
        for (z, &keep) in c.iter_mut().zip(&self.keep) {
            if !keep {
                *z = Complex64::default();
            }
        }
    }

    /// Spectrum of component `axis` of `K * f`, multiplier `i xi_axis / |xi|^2`
    /// with the zero mode removed.
    pub fn kernel_component_hat(&self, f_hat: &[Complex64], axis: usize) -> Vec<Complex64> {
        let d = self.grid.d();
        f_hat
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let k2 = self.ksq[i];
                if k2 == 0.0 {
                    Complex64::default()
                } else {
                    z * Complex64::new(0.0, self.kodd[i * d + axis] / k2)
                }
            })
            .collect()
    }

    /// `K * f` in real space, one field per component.
    pub fn kernel_convolve(&self, f_hat: &[Complex64]) -> Vec<Vec<f64>> {
        (0..self.grid.d())
            .map(|axis| self.inverse_real(self.kernel_component_hat(f_hat, axis)))
            .collect()
    }

    /// Accumulates `sign * i xi_axis * v_hat` into `out` (one divergence term).
    pub fn add_derivative(&self, out: &mut [Complex64], v_hat: &[Complex64], axis: usize, sign: f64) {
        let d = self.grid.d();
        for (i, (o, &z)) in out.iter_mut().zip(v_hat).enumerate() {
            *o += z * Complex64::new(0.0, sign * self.kodd[i * d + axis]);
        }
    }

    /// `-div(K * f)` in real space; the identity on mean-zero fields.
    pub fn neg_div_kernel(&self, f: &GridField) -> GridField {
        let f_hat = self.forward(f.values());
        let mut acc = vec![Complex64::default(); f_hat.len()];
        for axis in 0..self.grid.d() {
            let comp = self.kernel_component_hat(&f_hat, axis);
            self.add_derivative(&mut acc, &comp, axis, -1.0);
        }
        GridField::from_values(self.grid, self.inverse_real(acc)).expect("same grid")
    }

    /// Applies `(1 + |xi|^2)^{beta/2}` (Bessel potential of order `-beta`).
    pub fn apply_bessel(&self, c: &mut [Complex64], beta: f64) {
        for (z, &k2) in c.iter_mut().zip(&self.ksq) {
            *z *= (1.0 + k2).powf(beta / 2.0);
        }
    }

    pub fn heat(&self, f: &GridField, t: f64) -> GridField {
        let mut c = self.forward(f.values());
        self.apply_heat(&mut c, t);
        GridField::from_values(self.grid, self.inverse_real(c)).expect("same grid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let f = g.sample(|x| (x[0] * 3.0).sin() + x[1] * x[2]);
        let s = Spectral::new(g);
        let back = s.inverse_real(s.forward(f.values()));
        for (a, b) in back.iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_a_sine() {
        let g = Grid::new(2, 32, std::f64::consts::PI).unwrap();
        let s = Spectral::new(g);
        let f = g.sample(|x| (2.0 * x[1]).sin());
        let fh = s.forward(f.values());
        let mut out = vec![Complex64::default(); fh.len()];
        s.add_derivative(&mut out, &fh, 1, 1.0);
        let df = s.inverse_real(out);
        let expect = g.sample(|x| 2.0 * (2.0 * x[1]).cos());
        for (a, b) in df.iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
