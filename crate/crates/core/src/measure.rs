//! Empirical measures and the functionals used to compare them with the PDE:
//! mollification onto a grid, the `L^1 + L^r` error, grid Holder and Bessel
//! diagnostics, and the Kantorovich-Rubinstein (flat) distance.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, KsError, Result};
use crate::flat_metric::FlatMetric;
use crate::grid::{Grid, GridField};
use crate::kernel::Mollifier;
use crate::spectral::Spectral;

/// Atoms of weight `1 / N` each.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    d: usize,
    n_initial: usize,
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    /// `atoms` holds positions back to back, `d` coordinates each.
    pub fn new(d: usize, n_initial: usize, atoms: Vec<f64>) -> Result<Self> {
        if n_initial == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !atoms.len().is_multiple_of(d) {
            return Err(invalid("atoms", "length is not a multiple of d"));
        }
        Ok(Self { d, n_initial, atoms })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_initial(&self) -> usize {
        self.n_initial
    }

    pub fn len(&self) -> usize {
        self.atoms.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.n_initial as f64
    }

    /// `|atoms| / N`.
    pub fn mass(&self) -> f64 {
        self.len() as f64 * self.weight()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.chunks_exact(self.d)
    }

    /// Integral of `f` against the measure.
    pub fn pair<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.atoms().map(f).sum::<f64>() * self.weight()
    }
}

/// Integrability exponent `r > d` and diagnostic order `gamma` in `[d/r, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub r: f64,
    pub gamma: f64,
}

impl NormSpec {
    pub fn new(d: usize, r: f64, gamma: f64) -> Result<Self> {
        if !(r > d as f64) {
            return Err(KsError::AssumptionViolated(format!("r = {r} must exceed d = {d}")));
        }
        let lo = d as f64 / r;
        if !(gamma >= lo && gamma < 1.0) {
            return Err(KsError::AssumptionViolated(format!(
                "gamma = {gamma} must lie in [d/r, 1) = [{lo}, 1)"
            )));
        }
        Ok(Self { r, gamma })
    }
}

/// `u^N = theta^N * mu` sampled on `grid`.
///
/// Each atom deposits `theta^N` evaluated at the nodes of its support,
/// rescaled so the deposit has discrete mass exactly `1 / N`; nodes outside
/// the box are dropped.
pub fn mollify(mu: &EmpiricalMeasure, moll: &Mollifier, grid: &Grid) -> Result<GridField> {
    if mu.d() != grid.d() || moll.d() != grid.d() {
        return Err(invalid("d", "measure, mollifier and grid dimensions differ"));
    }
    let h = grid.spacing();
    let limit = moll.radius() / 4.0;
    if h > limit * (1.0 + 1e-12) {
        return Err(KsError::ResolutionTooCoarse { spacing: h, limit });
    }
    let d = grid.d();
    let m = grid.side() as i64;
    let l = grid.half_width();
    let radius = moll.radius();
    let reach = (radius / h).ceil() as i64 + 1;
    let mut field = GridField::zeros(*grid);
    let cell = grid.cell_volume();
    let weight = mu.weight();
    let mut stencil: Vec<(i64, f64)> = Vec::new();
    let mut idx = [0i64; 3];
    for atom in mu.atoms() {
        let mut lo = [0i64; 3];
        for k in 0..d {
            lo[k] = ((atom[k] + l) / h).round() as i64 - reach;
        }
        let width = (2 * reach + 1) as usize;
        let count = width.pow(d as u32);
        stencil.clear();
        let mut total = 0.0;
        for j in 0..count {
            let mut rem = j;
            let mut r2 = 0.0;
            let mut inside = true;
            let mut flat = 0i64;
            for k in (0..d).rev() {
                idx[k] = lo[k] + (rem % width) as i64;
                rem /= width;
            }
            for k in 0..d {
                let x = -l + idx[k] as f64 * h - atom[k];
                r2 += x * x;
                inside &= (0..m).contains(&idx[k]);
                flat = flat * m + idx[k];
            }
            let v = moll.eval_sq(r2);
            if v > 0.0 {
                total += v;
                stencil.push((if inside { flat } else { -1 }, v));
            }
        }
        if total == 0.0 {
            continue;
        }
        let scale = weight / (total * cell);
        let values = field.values_mut();
        for &(flat, v) in &stencil {
            if flat >= 0 {
                values[flat as usize] += v * scale;
            }
        }
    }
    Ok(field)
}

/// `(||a - b||_1, ||a - b||_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l1: f64,
    pub lr: f64,
}

impl ErrorNorms {
    /// `||.||_{L^1 cap L^r} = ||.||_1 + ||.||_r`.
    pub fn total(&self) -> f64 {
        self.l1 + self.lr
    }
}

pub fn error_l1lr(a: &GridField, b: &GridField, spec: &NormSpec) -> Result<ErrorNorms> {
    let diff = a.sub(b)?;
    Ok(ErrorNorms {
        l1: diff.norm_l1(),
        lr: diff.norm_lp(spec.r),
    })
}

/// Lower bound on `[f]_delta` from axis-aligned node pairs at dyadic
/// separations `h, 2h, 4h, ...` up to the half width.
pub fn holder_seminorm(f: &GridField, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid("delta", "must lie in (0, 1]"));
    }
    let g = f.grid();
    let d = g.d();
    let m = g.side();
    let h = g.spacing();
    let vals = f.values();
    let mut best = 0.0f64;
    let mut idx = [0usize; 3];
    let mut shift = 1usize;
    while shift < m && shift as f64 * h <= g.half_width() + 1e-12 {
        let denom = (shift as f64 * h).powf(delta);
        for axis in 0..d {
            let stride = m.pow((d - 1 - axis) as u32);
            for flat in 0..vals.len() {
                g.unflatten(flat, &mut idx[..d]);
                if idx[axis] + shift >= m {
                    continue;
                }
                let q = (vals[flat + shift * stride] - vals[flat]).abs() / denom;
                best = best.max(q);
            }
        }
        shift *= 2;
    }
    Ok(best)
}

/// `||(I - Delta)^{beta/2} f||_{L^p}` via the spectral multiplier.
pub fn bessel_norm(spectral: &Spectral, f: &GridField, beta: f64, p: f64) -> Result<f64> {
    if f.grid() != spectral.grid() {
        return Err(KsError::GridMismatch);
    }
    let mut c = spectral.forward(f.values());
    spectral.apply_bessel(&mut c, beta);
    let g = GridField::from_values(*f.grid(), spectral.inverse_real(c))?;
    Ok(g.norm_lp(p))
}

/// Flat distance with its discretization metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrDistance {
    pub value: f64,
    /// Coarse cells per axis.
    pub side: usize,
    /// Coarse cell width.
    pub cell: f64,
    /// Primal-dual gap of the flow solve.
    pub gap: f64,
}

/// Coarse-grid flat distance estimator tied to a fine [`Grid`].
///
/// The coarse cells are blocks of fine cells, so fine-grid fields aggregate
/// exactly. Atoms fall in the coarse cell containing their nearest fine node.
#[derive(Debug, Clone)]
pub struct KrEstimator {
    grid: Grid,
    factor: usize,
    metric: FlatMetric,
}

pub const DEFAULT_KR_SIDE_2D: usize = 64;
pub const DEFAULT_KR_SIDE_3D: usize = 16;

impl KrEstimator {
    pub fn new(grid: Grid, max_side: usize) -> Result<Self> {
        if max_side == 0 || max_side > 64 {
            return Err(invalid("kr_side", "coarse side must lie in 1..=64"));
        }
        let m = grid.side();
        let mut side = m;
        while side > max_side {
            side /= 2;
        }
        let factor = m / side;
        let metric = FlatMetric::new(grid.d(), side, factor as f64 * grid.spacing())?;
        Ok(Self { grid, factor, metric })
    }

    pub fn with_default_side(grid: Grid) -> Result<Self> {
        let side = if grid.d() == 2 { DEFAULT_KR_SIDE_2D } else { DEFAULT_KR_SIDE_3D };
        Self::new(grid, side)
    }

    pub fn side(&self) -> usize {
        self.metric.side()
    }

    pub fn cell(&self) -> f64 {
        self.metric.cell()
    }

    pub fn coarsen_field(&self, f: &GridField) -> Result<Vec<f64>> {
        if f.grid() != &self.grid {
            return Err(KsError::GridMismatch);
        }
        let d = self.grid.d();
        let side = self.metric.side();
        let mut out = vec![0.0; self.metric.cells()];
        let mut idx = [0usize; 3];
        let vol = self.grid.cell_volume();
        for (flat, &v) in f.values().iter().enumerate() {
            self.grid.unflatten(flat, &mut idx[..d]);
            let c = idx[..d].iter().fold(0, |acc, &i| acc * side + i / self.factor);
            out[c] += v * vol;
        }
        Ok(out)
    }

    pub fn coarsen_measure(&self, mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        let d = self.grid.d();
        if mu.d() != d {
            return Err(invalid("d", "measure and grid dimensions differ"));
        }
        let side = self.metric.side() as i64;
        let width = self.metric.cell();
        let l = self.grid.half_width();
        let h = self.grid.spacing();
        let mut out = vec![0.0; self.metric.cells()];
        let mut outside = 0.0;
        let w = mu.weight();
        'atoms: for atom in mu.atoms() {
            let mut c = 0usize;
            for &x in atom {
                let k = ((x + l + h / 2.0) / width).floor() as i64;
                if !(0..side).contains(&k) {
                    outside += w;
                    continue 'atoms;
                }
                c = c * side as usize + k as usize;
            }
            out[c] += w;
        }
        if outside > 1e-6 {
            return Err(KsError::UnboundedSupport { mass: outside });
        }
        Ok(out)
    }

    fn solve(&self, a: &[f64], b: &[f64]) -> Result<KrDistance> {
        let r = self.metric.distance(a, b)?;
        Ok(KrDistance {
            value: r.value,
            side: self.metric.side(),
            cell: self.metric.cell(),
            gap: r.gap,
        })
    }

    pub fn measure_vs_field(&self, mu: &EmpiricalMeasure, v: &GridField) -> Result<KrDistance> {
        self.solve(&self.coarsen_measure(mu)?, &self.coarsen_field(v)?)
    }

    pub fn field_vs_field(&self, a: &GridField, b: &GridField) -> Result<KrDistance> {
        self.solve(&self.coarsen_field(a)?, &self.coarsen_field(b)?)
    }
}

/// Flat distance between atoms and a field, on a coarse grid of side <= 64.
pub fn kr_distance(mu: &EmpiricalMeasure, v: &GridField) -> Result<KrDistance> {
    KrEstimator::with_default_side(*v.grid())?.measure_vs_field(mu, v)
}
