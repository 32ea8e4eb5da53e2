//! The Coulomb kernel `K(x) = -x / (c_d |x|^d)`, the bump mollifier family
//! `theta^N(x) = N^{alpha d} theta(N^alpha x)`, the mollified kernel
//! `K * theta^N` tabulated near the origin, and the drift cutoff `F_A`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{invalid, KsError, Result};

pub const MAX_DIM: usize = 3;

fn check_dim(d: usize) -> Result<()> {
    if (2..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(KsError::UnsupportedDimension(d))
    }
}

/// `K(x) = -x / (c_d |x|^d)` with `c_d = d |B_1|`, the gradient of the
/// Newtonian potential, so that `-div K = delta_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoulombKernel {
    d: usize,
    c_d: f64,
}

impl CoulombKernel {
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            d,
            c_d: d as f64 * unit_ball_volume(d),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `d |B_1|`, the surface area of the unit sphere.
    pub fn c_d(&self) -> f64 {
        self.c_d
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        if r < 1e-14 {
            return Err(KsError::SingularOrigin { norm: r });
        }
        let s = -1.0 / (self.c_d * r.powi(self.d as i32));
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = s * xi;
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}

/// `pi^{d/2} / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::PI.powf(h) / gamma(h + 1.0)
}

const PROFILE_NODES: usize = 4096;

/// The normalized bump `theta(x) = c exp(-1 / (1 - |x|^2))` on the unit ball,
/// with its radial mass profile `m(s) = int_{|y|<s} theta`.
#[derive(Debug)]
pub struct BumpProfile {
    d: usize,
    norm: f64,
    sphere: f64,
    /// `m(i / PROFILE_NODES)`.
    mass: Vec<f64>,
}

fn bump_raw(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s2)).exp()
    }
}

impl BumpProfile {
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        let sphere = d as f64 * unit_ball_volume(d);
        let radial = |s: f64| s.powi(d as i32 - 1) * bump_raw(s * s);
        // composite Simpson, 8 panels per node interval
        let ds = 1.0 / PROFILE_NODES as f64;
        let mut cumulative = Vec::with_capacity(PROFILE_NODES + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 0..PROFILE_NODES {
            let a = i as f64 * ds;
            let sub = ds / 8.0;
            let mut s = radial(a) + radial(a + ds);
            for j in 1..8 {
                let w = if j % 2 == 1 { 4.0 } else { 2.0 };
                s += w * radial(a + j as f64 * sub);
            }
            acc += s * sub / 3.0;
            cumulative.push(acc);
        }
        let total = acc;
        let norm = 1.0 / (sphere * total);
        let mass = cumulative.into_iter().map(|v| v / total).collect();
        Ok(Self {
            d,
            norm,
            sphere,
            mass,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `theta(0)`.
    pub fn peak(&self) -> f64 {
        self.norm * (-1.0f64).exp()
    }

    pub fn eval_sq(&self, s2: f64) -> f64 {
        self.norm * bump_raw(s2)
    }

    /// Mass of `theta` inside the ball of radius `s`.
    pub fn enclosed_mass(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let d = self.d as i32;
        let deriv = |t: f64| self.sphere * self.norm * t.powi(d - 1) * bump_raw(t * t);
        let ds = 1.0 / PROFILE_NODES as f64;
        let u = s / ds;
        let i = (u.floor() as usize).min(PROFILE_NODES - 1);
        let t = u - i as f64;
        // cubic Hermite with exact derivatives
        let (y0, y1) = (self.mass[i], self.mass[i + 1]);
        let (m0, m1) = (deriv(i as f64 * ds) * ds, deriv((i + 1) as f64 * ds) * ds);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }
}

/// `theta^N(x) = N^{alpha d} theta(N^alpha x)`, supported in `|x| < N^{-alpha}`.
#[derive(Debug, Clone)]
pub struct Mollifier {
    alpha: f64,
    n: usize,
    profile: Arc<BumpProfile>,
    inv_radius: f64,
    amplitude: f64,
}

impl Mollifier {
    pub fn new(d: usize, alpha: f64, n: usize) -> Result<Self> {
        Self::with_profile(Arc::new(BumpProfile::new(d)?), alpha, n)
    }

    pub fn with_profile(profile: Arc<BumpProfile>, alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", "must be positive"));
        }
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        let inv_radius = (n as f64).powf(alpha);
        let amplitude = inv_radius.powi(profile.d() as i32);
        Ok(Self {
            alpha,
            n,
            profile,
            inv_radius,
            amplitude,
        })
    }

    pub fn d(&self) -> usize {
        self.profile.d()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn profile(&self) -> &Arc<BumpProfile> {
        &self.profile
    }

    /// Support radius `N^{-alpha}`.
    pub fn radius(&self) -> f64 {
        1.0 / self.inv_radius
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let s2: f64 = x.iter().map(|v| v * v).sum();
        self.eval_sq(s2)
    }

    /// `theta^N` as a function of `|x|^2`.
    #[inline]
    pub fn eval_sq(&self, r2: f64) -> f64 {
        self.amplitude * self.profile.eval_sq(r2 * self.inv_radius * self.inv_radius)
    }

    pub fn peak(&self) -> f64 {
        self.amplitude * self.profile.peak()
    }

    /// Mass of `theta^N` inside the ball of radius `rho`.
    pub fn enclosed_mass(&self, rho: f64) -> f64 {
        self.profile.enclosed_mass(rho * self.inv_radius)
    }
}

/// Component-wise cutoff `F_A`: identity on `[-A, A]`, constant `+-A` beyond
/// `A + 1`, joined by the C^1 ramp `A + s (1 - s)^2` on `[A, A + 1]`.
///
/// The ramp has slope in `[-1/3, 1]` and peaks at `A + 4/27`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    a: f64,
}

impl Cutoff {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid("cutoff_a", "must be positive"));
        }
        Ok(Self { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn scalar(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax <= self.a {
            return x;
        }
        let mag = if ax >= self.a + 1.0 {
            self.a
        } else {
            let s = ax - self.a;
            self.a + s * (1.0 - s) * (1.0 - s)
        };
        mag.copysign(x)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|&x| self.scalar(x)).collect()
    }

    pub fn apply_in_place(&self, v: &mut [f64]) {
        for x in v {
            *x = self.scalar(*x);
        }
    }
}

/// Identifies a cached table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableKey {
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    pub h_table: f64,
    pub l_table: f64,
}

/// `K * theta^N` sampled on a uniform grid around the origin, interpolated
/// multilinearly; beyond `2 N^{-alpha}` lookups return `K` itself.
///
/// Node values come from the radial mass profile: for a radial mollifier the
/// convolution equals `K(x)` times the mollifier mass inside `|x|`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    key: TableKey,
    kernel: CoulombKernel,
    near: f64,
    n_half: usize,
    side: usize,
    samples: Vec<f64>,
}

const TABLE_MAGIC: &[u8; 8] = b"KSKTAB01";

impl KernelTable {
    /// Builds the table for queries anywhere in `[-l_table, l_table]^d`.
    pub fn build(kernel: CoulombKernel, moll: &Mollifier, l_table: f64, h_table: f64) -> Result<Self> {
        if kernel.d() != moll.d() {
            return Err(invalid("d", "kernel and mollifier dimensions differ"));
        }
        let limit = moll.radius() / 8.0;
        if !(h_table > 0.0) || h_table > limit * (1.0 + 1e-12) {
            return Err(KsError::ResolutionTooCoarse {
                spacing: h_table,
                limit,
            });
        }
        let near = 2.0 * moll.radius();
        if !(l_table >= near) {
            return Err(invalid("l_table", "must cover the mollification zone"));
        }
        let n_half = (near / h_table).ceil() as usize + 1;
        let side = 2 * n_half + 1;
        let d = kernel.d();
        let mut samples = vec![0.0; side.pow(d as u32) * d];
        let mut idx = [0usize; MAX_DIM];
        let mut x = [0.0; MAX_DIM];
        for node in 0..side.pow(d as u32) {
            let mut rem = node;
            for k in (0..d).rev() {
                idx[k] = rem % side;
                rem /= side;
            }
            for k in 0..d {
                x[k] = (idx[k] as f64 - n_half as f64) * h_table;
            }
            let r = x[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                continue;
            }
            let scale = -moll.enclosed_mass(r) / (kernel.c_d() * r.powi(d as i32));
            for k in 0..d {
                samples[node * d + k] = scale * x[k];
            }
        }
        Ok(Self {
            key: TableKey {
                d,
                n: moll.n(),
                alpha: moll.alpha(),
                h_table,
                l_table,
            },
            kernel,
            near,
            n_half,
            side,
            samples,
        })
    }

    pub fn key(&self) -> TableKey {
        self.key
    }

    pub fn d(&self) -> usize {
        self.key.d
    }

    pub fn kernel(&self) -> &CoulombKernel {
        &self.kernel
    }

    /// Radius below which lookups interpolate.
    pub fn near_radius(&self) -> f64 {
        self.near
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Mutable samples: lets diagnostics inject faults.
    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    /// Largest sampled magnitude.
    pub fn sup_norm(&self) -> f64 {
        let d = self.key.d;
        self.samples
            .chunks(d)
            .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Writes `K * theta^N (x)` into `out`.
    #[inline]
    pub fn lookup_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.key.d;
        let r2: f64 = x[..d].iter().map(|v| v * v).sum();
        if r2 >= self.near * self.near {
            let rd = if d == 2 { r2 } else { r2 * r2.sqrt() };
            let s = -1.0 / (self.kernel.c_d() * rd);
            for k in 0..d {
                out[k] = s * x[k];
            }
            return;
        }
        let h = self.key.h_table;
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..d {
            let s = x[k] / h + self.n_half as f64;
            let i = s.floor();
            base[k] = i as usize;
            frac[k] = s - i;
        }
        for o in out[..d].iter_mut() {
            *o = 0.0;
        }
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut node = 0;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                node = node * self.side + base[k] + bit;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            let v = &self.samples[node * d..node * d + d];
            for k in 0..d {
                out[k] += w * v[k];
            }
        }
    }

    pub fn lookup(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.key.d];
        self.lookup_into(x, &mut out);
        out
    }

    /// Cache file name for a key.
    pub fn cache_name(key: &TableKey) -> String {
        format!(
            "ktable_d{}_n{}_a{:016x}_h{:016x}_l{:016x}.bin",
            key.d,
            key.n,
            key.alpha.to_bits(),
            key.h_table.to_bits(),
            key.l_table.to_bits()
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + self.samples.len() * 8);
        buf.extend_from_slice(TABLE_MAGIC);
        buf.extend_from_slice(&(self.key.d as u64).to_le_bytes());
        buf.extend_from_slice(&(self.key.n as u64).to_le_bytes());
        buf.extend_from_slice(&self.key.alpha.to_le_bytes());
        buf.extend_from_slice(&self.key.h_table.to_le_bytes());
        buf.extend_from_slice(&self.key.l_table.to_le_bytes());
        buf.extend_from_slice(&(self.n_half as u64).to_le_bytes());
        for v in &self.samples {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    /// Loads a cached table, returning `None` when the file holds another key.
    pub fn load(path: &Path, expected: &TableKey) -> Result<Option<Self>> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        let bad = || KsError::Io(format!("{}: malformed kernel table", path.display()));
        if buf.len() < 56 || &buf[..8] != TABLE_MAGIC {
            return Err(bad());
        }
        let word = |i: usize| -> [u8; 8] { buf[8 + 8 * i..16 + 8 * i].try_into().unwrap() };
        let key = TableKey {
            d: u64::from_le_bytes(word(0)) as usize,
            n: u64::from_le_bytes(word(1)) as usize,
            alpha: f64::from_le_bytes(word(2)),
            h_table: f64::from_le_bytes(word(3)),
            l_table: f64::from_le_bytes(word(4)),
        };
        let same = key.d == expected.d
            && key.n == expected.n
            && key.alpha.to_bits() == expected.alpha.to_bits()
            && key.h_table.to_bits() == expected.h_table.to_bits()
            && key.l_table.to_bits() == expected.l_table.to_bits();
        if !same {
            return Ok(None);
        }
        check_dim(key.d)?;
        let n_half = u64::from_le_bytes(word(5)) as usize;
        let side = 2 * n_half + 1;
        let count = side.pow(key.d as u32) * key.d;
        let body = &buf[56..];
        if body.len() != count * 8 {
            return Err(bad());
        }
        let samples = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let moll_radius = (key.n as f64).powf(-key.alpha);
        Ok(Some(Self {
            key,
            kernel: CoulombKernel::new(key.d)?,
            near: 2.0 * moll_radius,
            n_half,
            side,
            samples,
        }))
    }

    /// Reuses `dir/<cache_name>` when present, otherwise builds and stores it.
    pub fn load_or_build(
        dir: &Path,
        kernel: CoulombKernel,
        moll: &Mollifier,
        l_table: f64,
        h_table: f64,
    ) -> Result<Self> {
        let key = TableKey {
            d: kernel.d(),
            n: moll.n(),
            alpha: moll.alpha(),
            h_table,
            l_table,
        };
        let path: PathBuf = dir.join(Self::cache_name(&key));
        if path.exists() {
            if let Some(t) = Self::load(&path, &key)? {
                return Ok(t);
            }
        }
        let table = Self::build(kernel, moll, l_table, h_table)?;
        fs::create_dir_all(dir)?;
        table.save(&path)?;
        Ok(table)
    }
}
