//! The branching moderately interacting particle system.
//!
//! Between demographic events each particle follows
//! `dX = chi F_A((1/N) sum_j K*theta^N (X - X^j)) dt + sqrt(2) dB`; it divides
//! at rate `nu` and dies at rate `mu (u^N(X) ^ A)`, with `u^N = theta^N * mu^N`.
//! Time is discretized on a shared lattice: an explicit Euler-Maruyama move
//! followed by at most one demographic event per particle.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, KsError, Result};
use crate::grid::{Grid, GridField};
use crate::kernel::{Cutoff, KernelTable, Mollifier, MAX_DIM};
use crate::measure::{mollify, EmpiricalMeasure};

/// Ulam-Harris-Neveu label: a root in `1..=N` and a path over `{1, 2}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UhnLabel {
    pub root: u32,
    pub path: Vec<u8>,
}

impl UhnLabel {
    pub fn root(root: u32) -> Self {
        Self { root, path: Vec::new() }
    }

    pub fn generation(&self) -> usize {
        self.path.len()
    }

    pub fn mother(&self) -> Option<Self> {
        let mut path = self.path.clone();
        path.pop()?;
        Some(Self { root: self.root, path })
    }

    pub fn children(&self) -> [Self; 2] {
        let child = |b: u8| {
            let mut path = self.path.clone();
            path.push(b);
            Self { root: self.root, path }
        };
        [child(1), child(2)]
    }

    /// True for strict ancestors.
    pub fn is_ancestor_of(&self, other: &Self) -> bool {
        self.root == other.root && self.path.len() < other.path.len() && other.path.starts_with(&self.path)
    }

    /// Seed of the particle's private stream.
    fn stream_seed(&self, seed: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"ks-particle");
        h.update(seed.to_le_bytes());
        h.update(self.root.to_le_bytes());
        h.update(&self.path);
        h.finalize().into()
    }
}

impl fmt::Display for UhnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)?;
        for b in &self.path {
            write!(f, ".{b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub label: UhnLabel,
    d: usize,
    x: [f64; MAX_DIM],
    pub t_birth: f64,
    rng: ChaCha8Rng,
}

impl Particle {
    pub fn new(label: UhnLabel, position: &[f64], t_birth: f64, seed: u64) -> Self {
        let d = position.len();
        assert!(d <= MAX_DIM, "dimension {d} exceeds {MAX_DIM}");
        let mut x = [0.0; MAX_DIM];
        x[..d].copy_from_slice(position);
        let rng = ChaCha8Rng::from_seed(label.stream_seed(seed));
        Self {
            label,
            d,
            x,
            t_birth,
            rng,
        }
    }

    pub fn position(&self) -> &[f64] {
        &self.x[..self.d]
    }
}

#[derive(Debug, Clone)]
pub struct Population {
    d: usize,
    n_initial: usize,
    seed: u64,
    alive: Vec<Particle>,
    pub time: f64,
    pub births: u64,
    pub deaths: u64,
    pub divisions: u64,
}

impl Population {
    /// Roots `1..=N` at the given positions (flat, `d` per particle), time 0.
    pub fn from_positions(d: usize, positions: &[f64], seed: u64) -> Result<Self> {
        if d == 0 || d > MAX_DIM || !positions.len().is_multiple_of(d) {
            return Err(invalid("positions", "length must be a multiple of d"));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(invalid("positions", "must be finite"));
        }
        let n = positions.len() / d;
        let alive = positions
            .chunks(d)
            .enumerate()
            .map(|(i, x)| Particle::new(UhnLabel::root(i as u32 + 1), x, 0.0, seed))
            .collect();
        Ok(Self {
            d,
            n_initial: n,
            seed,
            alive,
            time: 0.0,
            births: 0,
            deaths: 0,
            divisions: 0,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_initial(&self) -> usize {
        self.n_initial
    }

    pub fn len(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.alive
    }

    /// `m^N_t = |alive| / N`.
    pub fn mass(&self) -> f64 {
        self.alive.len() as f64 / self.n_initial.max(1) as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.alive.len() * self.d);
        for p in &self.alive {
            out.extend_from_slice(p.position());
        }
        out
    }

    pub fn empirical(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.d, self.n_initial, self.positions()).expect("consistent dimensions")
    }

    /// Largest `|x|` over alive particles.
    pub fn max_radius(&self) -> f64 {
        self.alive
            .iter()
            .map(|p| p.position().iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleParams {
    pub d: usize,
    pub chi: f64,
    pub nu: f64,
    pub mu: f64,
    pub alpha: f64,
    pub cutoff_a: f64,
    pub dt: f64,
    /// The population may not exceed this multiple of `N`.
    pub max_particles_factor: f64,
}

impl ParticleParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("chi", self.chi), ("nu", self.nu), ("mu", self.mu)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be finite and non-negative"));
            }
        }
        if !(self.alpha > 0.0) {
            return Err(invalid("alpha", "must be positive"));
        }
        if !(self.cutoff_a > 0.0) {
            return Err(invalid("cutoff_a", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.max_particles_factor >= 1.0) {
            return Err(invalid("max_particles_factor", "must be at least 1"));
        }
        Ok(())
    }
}

/// Density seen by particle `index` (at `x`) when drawing its death clock.
pub trait LocalDensity {
    fn density_at(&self, index: usize, x: &[f64]) -> f64;
}

/// A mollified field, read by multilinear interpolation.
impl LocalDensity for GridField {
    fn density_at(&self, _index: usize, x: &[f64]) -> f64 {
        self.interpolate(x)
    }
}

/// One exact value per alive particle, in population order.
impl LocalDensity for [f64] {
    fn density_at(&self, index: usize, _x: &[f64]) -> f64 {
        self[index]
    }
}

/// The same value everywhere.
#[derive(Debug, Clone, Copy)]
pub struct UniformDensity(pub f64);

impl LocalDensity for UniformDensity {
    fn density_at(&self, _index: usize, _x: &[f64]) -> f64 {
        self.0
    }
}

/// Brownian increments used by [`ParticleSystem::em_step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Gaussian,
    /// Drift only.
    Frozen,
}

/// Raw interaction sums at the start of a step.
#[derive(Debug, Clone)]
pub struct Interactions {
    /// `sum_j K*theta^N (X^k - X^j)`, `d` per particle.
    pub field: Vec<f64>,
    /// `u^N(X^k)`, one per particle.
    pub density: Vec<f64>,
}

/// A copy of the system at a snapshot time.
#[derive(Debug, Clone)]
pub struct ParticleSnapshot {
    pub t: f64,
    pub population: Population,
    pub density: Option<GridField>,
}

pub struct ParticleSystem<'a> {
    params: ParticleParams,
    table: &'a KernelTable,
    moll: Mollifier,
    cutoff: Cutoff,
    /// Positions beyond this radius are logged once per run.
    pub warn_radius: Option<f64>,
}

impl<'a> ParticleSystem<'a> {
    pub fn new(params: ParticleParams, table: &'a KernelTable, moll: Mollifier) -> Result<Self> {
        params.validate()?;
        if table.d() != params.d || moll.d() != params.d {
            return Err(invalid("d", "table, mollifier and parameter dimensions differ"));
        }
        if (moll.alpha() - params.alpha).abs() > 1e-12 || table.key().n != moll.n() {
            return Err(invalid("alpha", "mollifier and kernel table disagree with parameters"));
        }
        Ok(Self {
            params,
            table,
            moll,
            cutoff: Cutoff::new(params.cutoff_a)?,
            warn_radius: None,
        })
    }

    pub fn params(&self) -> &ParticleParams {
        &self.params
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.moll
    }

    /// `chi F_A((1/N) sum_j K*theta^N (x - X^j))` at an arbitrary point.
    pub fn drift_at(&self, pop: &Population, x: &[f64]) -> Vec<f64> {
        let d = self.params.d;
        let mut acc = vec![0.0; d];
        let mut v = [0.0; MAX_DIM];
        let mut dx = [0.0; MAX_DIM];
        for p in &pop.alive {
            for k in 0..d {
                dx[k] = x[k] - p.x[k];
            }
            self.table.lookup_into(&dx[..d], &mut v[..d]);
            for k in 0..d {
                acc[k] += v[k];
            }
        }
        self.finish_drift(pop.n_initial, &mut acc);
        acc
    }

    fn finish_drift(&self, n: usize, raw: &mut [f64]) {
        let scale = 1.0 / n.max(1) as f64;
        for c in raw.iter_mut() {
            *c = self.params.chi * self.cutoff.scalar(*c * scale);
        }
    }

    /// Kernel sums and mollified density at every particle, by one pass over
    /// unordered pairs. The self terms contribute `K*theta^N(0) = 0` and
    /// `theta^N(0)`.
    pub fn interactions(&self, pop: &Population) -> Interactions {
        let d = self.params.d;
        let n = pop.alive.len();
        let pos = pop.positions();
        let mut field = vec![0.0; n * d];
        let mut density = vec![self.moll.peak(); n];
        let r2_moll = self.moll.radius().powi(2);
        let mut v = [0.0; MAX_DIM];
        let mut dx = [0.0; MAX_DIM];
        for i in 0..n {
            let xi = &pos[i * d..i * d + d];
            let mut fi = [0.0; MAX_DIM];
            let mut rho_i = 0.0;
            for j in i + 1..n {
                let xj = &pos[j * d..j * d + d];
                let mut r2 = 0.0;
                for k in 0..d {
                    dx[k] = xi[k] - xj[k];
                    r2 += dx[k] * dx[k];
                }
                self.table.lookup_into(&dx[..d], &mut v[..d]);
                let fj = &mut field[j * d..j * d + d];
                for k in 0..d {
                    fi[k] += v[k];
                    fj[k] -= v[k];
                }
                if r2 < r2_moll {
                    let w = self.moll.eval_sq(r2);
                    rho_i += w;
                    density[j] += w;
                }
            }
            for k in 0..d {
                field[i * d + k] += fi[k];
            }
            density[i] += rho_i;
        }
        let scale = 1.0 / pop.n_initial.max(1) as f64;
        for rho in density.iter_mut() {
            *rho *= scale;
        }
        Interactions { field, density }
    }

    /// Moves every particle by `drift dt + sqrt(2 dt) xi` with the drift taken
    /// from the start-of-step configuration.
    pub fn em_step(&self, pop: &mut Population, interactions: &Interactions, dt: f64, noise: Noise) {
        let d = self.params.d;
        let n = pop.n_initial;
        let sd = (2.0 * dt).sqrt();
        let mut drift = [0.0; MAX_DIM];
        for (i, p) in pop.alive.iter_mut().enumerate() {
            drift[..d].copy_from_slice(&interactions.field[i * d..i * d + d]);
            self.finish_drift(n, &mut drift[..d]);
            for k in 0..d {
                let xi: f64 = match noise {
                    Noise::Gaussian => p.rng.sample(StandardNormal),
                    Noise::Frozen => 0.0,
                };
                p.x[k] += drift[k] * dt + sd * xi;
            }
        }
    }

    /// Division with probability `1 - e^{-nu dt}`; otherwise death with
    /// probability `1 - e^{-mu (u ^ A) dt}`. One uniform per particle decides
    /// both, through disjoint sub-intervals.
    pub fn demographic_step<L: LocalDensity + ?Sized>(&self, pop: &mut Population, density: &L, dt: f64) -> Result<()> {
        demographic_step(pop, density, &self.params, dt)
    }

    /// One lattice step of length `dt`.
    pub fn step(&self, pop: &mut Population, dt: f64) -> Result<()> {
        if dt <= 0.0 {
            return Ok(());
        }
        let inter = self.interactions(pop);
        self.em_step(pop, &inter, dt, Noise::Gaussian);
        demographic_step(pop, inter.density.as_slice(), &self.params, dt)?;
        pop.time += dt;
        Ok(())
    }

    /// Runs to `t_end`, copying the system at `0`, each time in
    /// `snapshot_times` and `t_end`; `grid` (if any) receives `u^N`.
    pub fn simulate(
        &self,
        mut pop: Population,
        t_end: f64,
        snapshot_times: &[f64],
        grid: Option<&Grid>,
    ) -> Result<Vec<ParticleSnapshot>> {
        if !(t_end >= 0.0) {
            return Err(invalid("t_end", "must be non-negative"));
        }
        let mut targets: Vec<f64> = snapshot_times.iter().copied().filter(|&t| t > 0.0 && t < t_end).collect();
        targets.push(t_end);
        targets.sort_by(f64::total_cmp);
        targets.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        let mut warned = false;
        let mut out = vec![self.snapshot(&pop, grid)?];
        let dt = self.params.dt;
        let mut steps: u64 = 0;
        let t0 = pop.time;
        for &target in &targets {
            if target <= 0.0 {
                continue;
            }
            loop {
                let remaining = target - (t0 + steps as f64 * dt);
                if remaining <= 1e-12 * target.max(1.0) {
                    break;
                }
                if remaining < dt * (1.0 - 1e-9) {
                    // snapshot off the lattice: a short step lands on it
                    self.step(&mut pop, remaining)?;
                    pop.time = target;
                    break;
                }
                self.step(&mut pop, dt)?;
                steps += 1;
                pop.time = t0 + steps as f64 * dt;
                if let (Some(r), false) = (self.warn_radius, warned) {
                    let far = pop.max_radius();
                    if far > r {
                        log::warn!("particle at radius {far:.3} beyond {r:.3} at t = {:.4}", pop.time);
                        warned = true;
                    }
                }
            }
            pop.time = target;
            out.push(self.snapshot(&pop, grid)?);
        }
        Ok(out)
    }

    fn snapshot(&self, pop: &Population, grid: Option<&Grid>) -> Result<ParticleSnapshot> {
        let density = match grid {
            Some(g) => Some(mollify(&pop.empirical(), &self.moll, g)?),
            None => None,
        };
        Ok(ParticleSnapshot {
            t: pop.time,
            population: pop.clone(),
            density,
        })
    }
}

/// Demographic update shared by [`ParticleSystem`] and callers that supply
/// their own density (for example a frozen constant).
pub fn demographic_step<L: LocalDensity + ?Sized>(
    pop: &mut Population,
    density: &L,
    params: &ParticleParams,
    dt: f64,
) -> Result<()> {
    if dt <= 0.0 || (params.nu == 0.0 && params.mu == 0.0) {
        return Ok(());
    }
    let p_div = -(-params.nu * dt).exp_m1();
    let t_event = pop.time + dt;
    let seed = pop.seed;
    let limit = (params.max_particles_factor * pop.n_initial as f64).floor() as usize;
    let old = std::mem::take(&mut pop.alive);
    let mut next = Vec::with_capacity(old.len() + old.len() / 8 + 4);
    for (i, mut p) in old.into_iter().enumerate() {
        let u: f64 = p.rng.random();
        if u < p_div {
            pop.divisions += 1;
            pop.births += 2;
            for child in p.label.children() {
                next.push(Particle::new(child, p.position(), t_event, seed));
            }
            continue;
        }
        let rate = params.mu * density.density_at(i, p.position()).max(0.0).min(params.cutoff_a);
        let p_death = -(-rate * dt).exp_m1();
        if u < p_div + (1.0 - p_div) * p_death {
            pop.deaths += 1;
            continue;
        }
        next.push(p);
    }
    pop.alive = next;
    if pop.alive.len() > limit {
        return Err(KsError::PopulationExplosion {
            alive: pop.alive.len(),
            limit,
        });
    }
    Ok(())
}

/// `n` i.i.d. draws from the probability density `u0`: a cell chosen with
/// probability proportional to its value, then a uniform point in the cell.
pub fn sample_initial(u0: &GridField, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mass = u0.integral();
    if (mass - 1.0).abs() > 1e-3 {
        return Err(invalid("u0", "initial density must have unit mass"));
    }
    if u0.min() < 0.0 {
        return Err(invalid("u0", "initial density must be non-negative"));
    }
    let grid = u0.grid();
    let d = grid.d();
    let h = grid.spacing();
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for &v in u0.values() {
        acc += v;
        cdf.push(acc);
    }
    let mut h_seed = Sha256::new();
    h_seed.update(b"ks-initial");
    h_seed.update(seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(h_seed.finalize().into());
    let mut out = Vec::with_capacity(n * d);
    let mut x = [0.0; MAX_DIM];
    for _ in 0..n {
        let target = rng.random::<f64>() * acc;
        let cell = cdf.partition_point(|&c| c <= target).min(grid.len() - 1);
        grid.position(cell, &mut x[..d]);
        for xk in &x[..d] {
            out.push(xk + h * (rng.random::<f64>() - 0.5));
        }
    }
    Ok(out)
}
