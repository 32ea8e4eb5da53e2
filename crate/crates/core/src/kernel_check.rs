//! Invariant suite for the kernel, the mollifier, the kernel table and the
//! cutoff, with a fault-injection hook.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::grid::Grid;
use crate::harness::fit_slope;
use crate::kernel::{CoulombKernel, Cutoff, KernelTable, Mollifier};
use crate::pde::gaussian;
use crate::spectral::Spectral;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheckOptions {
    pub d: usize,
    /// Nodes per axis for the spectral identity.
    pub m: usize,
    pub tolerance: f64,
    /// Perturbs one table sample off the origin before checking.
    pub corrupt_table: bool,
}

impl KernelCheckOptions {
    /// 256^2 at `1e-6` in 2D, 64^3 at `1e-4` in 3D.
    pub fn default_for(d: usize) -> Self {
        let (m, tolerance) = if d == 3 { (64, 1e-4) } else { (256, 1e-6) };
        Self {
            d,
            m,
            tolerance,
            corrupt_table: false,
        }
    }
}

fn check(name: &'static str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        passed: value <= tolerance,
        value,
        tolerance,
    }
}

/// `K * theta^N (x)` by quadrature in polar coordinates centered at `x`,
/// where the kernel singularity cancels against the Jacobian:
/// `-(1/c_d) int_{S^{d-1}} e int_0^inf theta^N(x - s e) ds de`.
pub fn convolution_oracle(moll: &Mollifier, x: &[f64], n_angle: usize, n_radial: usize) -> Vec<f64> {
    let d = moll.d();
    let c_d = CoulombKernel::new(d).expect("supported dimension").c_d();
    let radius = moll.radius();
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let chord = |e: &[f64]| -> f64 {
        let b: f64 = x.iter().zip(e).map(|(a, c)| a * c).sum();
        let disc = b * b - x2 + radius * radius;
        if disc <= 0.0 {
            return 0.0;
        }
        let lo = (b - disc.sqrt()).max(0.0);
        let hi = b + disc.sqrt();
        if hi <= lo {
            return 0.0;
        }
        // composite Simpson along the ray
        let k = n_radial + n_radial % 2;
        let step = (hi - lo) / k as f64;
        let mut p = [0.0; 3];
        let mut s = 0.0;
        for i in 0..=k {
            let t = lo + i as f64 * step;
            for j in 0..d {
                p[j] = x[j] - t * e[j];
            }
            let w = if i == 0 || i == k {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * moll.eval(&p[..d]);
        }
        s * step / 3.0
    };
    let mut out = vec![0.0; d];
    if d == 2 {
        let dphi = 2.0 * std::f64::consts::PI / n_angle as f64;
        for i in 0..n_angle {
            let phi = (i as f64 + 0.5) * dphi;
            let e = [phi.cos(), phi.sin()];
            let w = chord(&e) * dphi;
            out[0] += w * e[0];
            out[1] += w * e[1];
        }
    } else {
        let (nodes, weights) = gauss_legendre(n_angle);
        let dphi = 2.0 * std::f64::consts::PI / (2 * n_angle) as f64;
        for (&ct, &wt) in nodes.iter().zip(&weights) {
            let st = (1.0 - ct * ct).sqrt();
            for j in 0..2 * n_angle {
                let phi = (j as f64 + 0.5) * dphi;
                let e = [st * phi.cos(), st * phi.sin(), ct];
                let w = chord(&e) * wt * dphi;
                for k in 0..3 {
                    out[k] += w * e[k];
                }
            }
        }
    }
    for v in &mut out {
        *v /= -c_d;
    }
    out
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Runs every check; the report lists each with its measured value.
pub fn run_kernel_checks(opts: &KernelCheckOptions) -> Result<Vec<CheckResult>> {
    let d = opts.d;
    let kernel = CoulombKernel::new(d)?;
    let mut out = Vec::new();

    // -div(K * g) = g on a mean-zero field
    let grid = Grid::new(d, opts.m, 4.0)?;
    let origin = vec![0.0; d];
    let a = gaussian(&grid, 1.0, 0.3, &origin);
    let b = gaussian(&grid, 1.0, 0.6, &origin);
    let g = a.sub(&b)?;
    let spectral = Spectral::new(grid);
    let back = spectral.neg_div_kernel(&g);
    out.push(check("fourier_identity", rel_l2(back.values(), g.values()), opts.tolerance));

    // normalization and antisymmetry of K
    let expect = if d == 2 { 2.0 } else { 4.0 } * std::f64::consts::PI;
    out.push(check("coulomb_normalization", (kernel.c_d() / expect - 1.0).abs(), 1e-14));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    let mut x = vec![0.0; d];
    let mut neg = vec![0.0; d];
    for _ in 0..1000 {
        for k in 0..d {
            x[k] = rng.random_range(-3.0..3.0);
            neg[k] = -x[k];
        }
        let (p, q) = (kernel.eval(&x)?, kernel.eval(&neg)?);
        for k in 0..d {
            worst = worst.max((p[k] + q[k]).abs());
        }
    }
    out.push(check("coulomb_antisymmetry", worst, 1e-15));

    // discrete unit mass of theta^N at 48 cells per radius
    let n = 1024;
    let alpha = 1.0 / 6.0;
    let moll = Mollifier::new(d, alpha, n)?;
    let h = moll.radius() / 48.0;
    let half = 49i64;
    let mut mass = 0.0;
    let count = (2 * half + 1).pow(d as u32);
    for j in 0..count {
        let mut rem = j;
        let mut r2 = 0.0;
        for _ in 0..d {
            let i = rem % (2 * half + 1) - half;
            rem /= 2 * half + 1;
            r2 += (i as f64 * h).powi(2);
        }
        mass += moll.eval_sq(r2);
    }
    mass *= h.powi(d as i32);
    out.push(check("mollifier_mass", (mass - 1.0).abs(), 1e-8));

    let cells_per_radius = 16.0;
    let mut table = KernelTable::build(kernel, &moll, 8.0, moll.radius() / cells_per_radius)?;
    if opts.corrupt_table {
        let i = table.samples().len() / 2 + 3 * d;
        table.samples_mut()[i] += 0.5;
    }
    let r = moll.radius();
    out.push(check("table_origin", table.lookup(&origin).iter().map(|v| v.abs()).fold(0.0, f64::max), 1e-15));

    // node j mirrors to node count - 1 - j
    let sup = table.sup_norm();
    let samples = table.samples();
    let nodes = samples.len() / d;
    let mut anti = 0.0f64;
    for j in 0..nodes {
        let mirror = nodes - 1 - j;
        for k in 0..d {
            anti = anti.max((samples[j * d + k] + samples[mirror * d + k]).abs());
        }
    }
    out.push(check("table_antisymmetry", anti / sup, 1e-9));

    // table against the polar oracle, inside and beyond the mollifier
    let (n_angle, n_radial) = if d == 2 { (720, 400) } else { (96, 200) };
    let mut worst_near = 0.0f64;
    let mut worst_far = 0.0f64;
    for &s in &[0.3, 0.7, 1.05, 1.6, 3.0] {
        for j in 0..3 {
            let phi = 0.4 + 1.7 * j as f64;
            for k in 0..d {
                x[k] = 0.0;
            }
            x[0] = s * r * phi.cos();
            x[1] = s * r * phi.sin() * if d == 3 { 0.6 } else { 1.0 };
            if d == 3 {
                x[2] = s * r * phi.sin() * 0.8;
            }
            let want = convolution_oracle(&moll, &x, n_angle, n_radial);
            let got = table.lookup(&x);
            let norm = want.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if s >= 3.0 {
                worst_far = worst_far.max(err / norm);
            } else {
                worst_near = worst_near.max(err / sup);
            }
        }
    }
    // multilinear interpolation error ~ (h / r)^2
    out.push(check("table_vs_oracle_near", worst_near, 2.0 / (cells_per_radius * cells_per_radius)));
    out.push(check("table_vs_oracle_far", worst_far, 1e-3));

    // sup |K * theta^N| ~ N^{alpha (d - 1)}
    let ns = [256.0, 1024.0, 4096.0];
    let mut sups = Vec::new();
    for &nn in &ns {
        let m = Mollifier::new(d, alpha, nn as usize)?;
        sups.push(KernelTable::build(kernel, &m, 8.0, m.radius() / 8.0)?.sup_norm());
    }
    let fit = fit_slope(&ns, &sups)?;
    out.push(check("table_sup_scaling", (fit.slope - alpha * (d as f64 - 1.0)).abs(), 0.1));

    // F_A is 1-Lipschitz in the sup norm
    let cutoff = Cutoff::new(2.0)?;
    let mut lip = 0.0f64;
    for _ in 0..10_000 {
        let (u, v): (f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        if u != v {
            lip = lip.max((cutoff.scalar(u) - cutoff.scalar(v)).abs() / (u - v).abs());
        }
    }
    out.push(check("cutoff_lipschitz", (lip - 1.0).max(0.0), 1e-12));
    Ok(out)
}

/// Fixed-width pass/fail table.
pub fn format_report(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&format!(
            "{:<24} {:<4}  value {:.3e}  tol {:.1e}\n",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.value,
            r.tolerance
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(6)).sum();
        assert!((s - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn default_suite_passes_in_2d() {
        let r = run_kernel_checks(&KernelCheckOptions::default_for(2)).unwrap();
        assert!(r.iter().all(|c| c.passed), "{}", format_report(&r));
    }

    #[test]
    fn corrupted_table_is_named() {
        let mut o = KernelCheckOptions::default_for(2);
        o.corrupt_table = true;
        let r = run_kernel_checks(&o).unwrap();
        let failed: Vec<_> = r.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert!(failed.contains(&"table_antisymmetry"), "{failed:?}");
    }

    #[test]
    fn oracle_matches_coulomb_outside_support() {
        let moll = Mollifier::new(2, 0.25, 16).unwrap();
        let x = [1.5, 0.0];
        let v = convolution_oracle(&moll, &x, 720, 400);
        let k = CoulombKernel::new(2).unwrap().eval(&x).unwrap();
        assert!((v[0] - k[0]).abs() < 1e-6 * k[0].abs());
        assert!(v[1].abs() < 1e-9);
    }
}
