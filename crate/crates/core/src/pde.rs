//! Mild solution of the Keller-Segel equation with logistic damping,
//!
//! `d_t u = Delta u - chi div(u K*u) + nu u - mu u^2`,
//!
//! on a periodic box. Each step of the exponential integrator freezes the
//! nonlinear terms and propagates them with the exact heat semigroup:
//!
//! `u+ = e^{dt Delta} [u - chi dt div(u K*u) + dt (nu u - mu u^2)]`.
//!
//! On the torus `K*` only sees the mean-zero part of its argument: the zero
//! Fourier mode is dropped, so `K * c = 0` for constants.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KsError, Result};
use crate::grid::{Grid, GridField};
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeParams {
    pub d: usize,
    pub chi: f64,
    pub nu: f64,
    pub mu: f64,
}

impl PdeParams {
    pub fn new(d: usize, chi: f64, nu: f64, mu: f64) -> Result<Self> {
        for (name, v) in [("chi", chi), ("nu", nu), ("mu", mu)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be finite and non-negative"));
            }
        }
        Ok(Self { d, chi, nu, mu })
    }

    /// `mu > (d - 2) chi / d`: the damping suppresses blow-up.
    pub fn global_regime(&self) -> bool {
        self.mu > (self.d as f64 - 2.0) * self.chi / self.d as f64
    }
}

/// Fires once `||u||_1 + ||u||_inf` crosses `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupMonitor {
    pub threshold: f64,
    pub triggered_at: Option<f64>,
}

pub const DEFAULT_THRESHOLD_FACTOR: f64 = 1e4;

impl BlowupMonitor {
    pub fn with_threshold(threshold: f64) -> Self {
        Self {
            threshold,
            triggered_at: None,
        }
    }

    /// Threshold `factor * (||u0||_1 + ||u0||_inf)`.
    pub fn relative_to(u0: &GridField, factor: f64) -> Self {
        Self::with_threshold(factor * (u0.norm_l1() + u0.norm_linf()))
    }

    pub fn fired(&self) -> bool {
        self.triggered_at.is_some()
    }

    pub fn observe(&mut self, t: f64, l1: f64, linf: f64) -> bool {
        if self.triggered_at.is_none() && l1 + linf > self.threshold {
            self.triggered_at = Some(t);
        }
        self.fired()
    }
}

/// Norms recorded with every snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub l1: f64,
    pub lr: f64,
    pub linf: f64,
    /// `||K * u||_inf`, Euclidean magnitude.
    pub kconv_linf: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub field: GridField,
    pub norms: FieldNorms,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: PdeParams,
    pub snapshots: Vec<Snapshot>,
    pub monitor: BlowupMonitor,
    /// `r` used for the `L^r` column of the snapshot norms.
    pub r: f64,
    /// Running suprema over every step, not only snapshots.
    pub sup_linf: f64,
    pub sup_kconv_linf: f64,
    /// Mass removed by negative clipping, summed over steps.
    pub clipped_mass: f64,
    /// Most negative pre-clip value relative to the sup norm.
    pub worst_negative: f64,
    pub steps: usize,
    pub t_reached: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory holds at least u0")
    }

    /// Field at a recorded snapshot time.
    pub fn at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-9 * t.max(1.0))
    }
}

/// Options for [`MildSolver::solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub t_end: f64,
    /// Largest step; steps shrink to honor the stability bound and snapshots.
    pub dt: f64,
    /// Extra snapshot times in `(0, t_end)`; `0` and `t_end` are always kept.
    pub snapshot_times: Vec<f64>,
    pub r: f64,
}

struct Prepared {
    u_hat: Vec<Complex64>,
    kconv: Vec<Vec<f64>>,
    kconv_linf: f64,
    linf: f64,
}

/// Outcome of one step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub field: GridField,
    pub dt: f64,
    pub clipped_mass: f64,
    pub min_before_clip: f64,
    pub kconv_linf: f64,
}

pub struct MildSolver {
    spectral: Spectral,
    params: PdeParams,
}

impl MildSolver {
    pub fn new(grid: Grid, params: PdeParams) -> Result<Self> {
        if grid.d() != params.d {
            return Err(invalid("d", "grid and parameter dimensions differ"));
        }
        Ok(Self {
            spectral: Spectral::new(grid),
            params,
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn params(&self) -> &PdeParams {
        &self.params
    }

    fn prepare(&self, u: &GridField) -> Prepared {
        let u_hat = self.spectral.forward(u.values());
        let (kconv, kconv_linf) = if self.params.chi > 0.0 {
            let kconv = self.spectral.kernel_convolve(&u_hat);
            let linf = kconv_magnitude(&kconv);
            (kconv, linf)
        } else {
            (Vec::new(), 0.0)
        };
        Prepared {
            u_hat,
            kconv,
            kconv_linf,
            linf: u.norm_linf(),
        }
    }

    fn dt_max_of(&self, prep: &Prepared) -> f64 {
        let h = self.spectral.grid().spacing();
        let p = &self.params;
        let rate = p.nu + p.mu * prep.linf + p.chi * prep.kconv_linf * self.spectral.max_wavenumber();
        let reactive = if rate > 0.0 { 0.1 / rate } else { f64::INFINITY };
        (h * h / 4.0).min(reactive)
    }

    /// `min(h^2/4, 0.1 / (nu + mu ||u||_inf + chi ||K*u||_inf pi/h))`.
    pub fn dt_max(&self, u: &GridField) -> f64 {
        self.dt_max_of(&self.prepare(u))
    }

    fn advance(&self, u: &GridField, prep: Prepared, dt: f64) -> StepReport {
        let p = &self.params;
        let sp = &self.spectral;
        let mut acc = prep.u_hat;
        if p.chi > 0.0 {
            for (axis, comp) in prep.kconv.iter().enumerate() {
                let flux: Vec<f64> = u.values().iter().zip(comp).map(|(a, b)| a * b).collect();
                let mut flux_hat = sp.forward(&flux);
                sp.apply_dealias(&mut flux_hat);
                sp.add_derivative(&mut acc, &flux_hat, axis, -p.chi * dt);
            }
        }
        if p.nu > 0.0 {
            for z in acc.iter_mut() {
                *z *= 1.0 + p.nu * dt;
            }
        }
        if p.mu > 0.0 {
            let sq: Vec<f64> = u.values().iter().map(|v| v * v).collect();
            let mut sq_hat = sp.forward(&sq);
            sp.apply_dealias(&mut sq_hat);
            for (z, s) in acc.iter_mut().zip(&sq_hat) {
                *z -= s * (p.mu * dt);
            }
        }
        sp.apply_heat(&mut acc, dt);
        let mut values = sp.inverse_real(acc);
        let mut min_before_clip = f64::INFINITY;
        let mut clipped = 0.0;
        for v in values.iter_mut() {
            min_before_clip = min_before_clip.min(*v);
            if *v < 0.0 {
                clipped -= *v;
                *v = 0.0;
            }
        }
        let grid = *sp.grid();
        StepReport {
            field: GridField::from_values(grid, values).expect("same grid"),
            dt,
            clipped_mass: clipped * grid.cell_volume(),
            min_before_clip,
            kconv_linf: prep.kconv_linf,
        }
    }

    /// One exponential step of size exactly `dt`.
    pub fn step_mild(&self, u: &GridField, dt: f64) -> Result<StepReport> {
        if !(dt >= 0.0) {
            return Err(invalid("dt", "must be non-negative"));
        }
        let prep = self.prepare(u);
        let dt_max = self.dt_max_of(&prep);
        if dt > dt_max * (1.0 + 1e-12) {
            return Err(KsError::StepTooLarge { dt, dt_max });
        }
        let report = self.advance(u, prep, dt);
        if !report.field.is_finite() {
            return Err(KsError::NumericalBlowup { t: dt });
        }
        Ok(report)
    }

    fn norms(&self, u: &GridField, r: f64, kconv_linf: Option<f64>) -> FieldNorms {
        let kconv_linf = kconv_linf.unwrap_or_else(|| {
            let kc = self.spectral.kernel_convolve(&self.spectral.forward(u.values()));
            kconv_magnitude(&kc)
        });
        FieldNorms {
            l1: u.norm_l1(),
            lr: u.norm_lp(r),
            linf: u.norm_linf(),
            kconv_linf,
        }
    }

    /// Integrates from `u0` to `t_end`, stopping early if the monitor fires.
    pub fn solve(&self, u0: &GridField, opts: &SolveOptions, mut monitor: BlowupMonitor) -> Result<Trajectory> {
        if u0.grid() != self.spectral.grid() {
            return Err(KsError::GridMismatch);
        }
        if !(opts.t_end >= 0.0) || !(opts.dt > 0.0) {
            return Err(invalid("t_end/dt", "need t_end >= 0 and dt > 0"));
        }
        if !u0.is_finite() || u0.min() < 0.0 {
            return Err(invalid("u0", "initial datum must be finite and non-negative"));
        }
        let mut times: Vec<f64> = opts
            .snapshot_times
            .iter()
            .copied()
            .filter(|&t| t > 0.0 && t < opts.t_end)
            .collect();
        if opts.t_end > 0.0 {
            times.push(opts.t_end);
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();

        let n0 = self.norms(u0, opts.r, None);
        let mut traj = Trajectory {
            params: self.params,
            snapshots: vec![Snapshot {
                t: 0.0,
                field: u0.clone(),
                norms: n0,
            }],
            monitor,
            r: opts.r,
            sup_linf: n0.linf,
            sup_kconv_linf: n0.kconv_linf,
            clipped_mass: 0.0,
            worst_negative: 0.0,
            steps: 0,
            t_reached: 0.0,
        };
        if monitor.observe(0.0, n0.l1, n0.linf) {
            traj.monitor = monitor;
            return Ok(traj);
        }

        let mut u = u0.clone();
        let mut t = 0.0;
        for &target in &times {
            while target - t > 1e-12 * target.max(1.0) {
                let prep = self.prepare(&u);
                let dt = opts.dt.min(self.dt_max_of(&prep)).min(target - t);
                let linf_prev = prep.linf;
                let report = self.advance(&u, prep, dt);
                traj.sup_kconv_linf = traj.sup_kconv_linf.max(report.kconv_linf);
                t = if target - (t + dt) <= 1e-12 * target.max(1.0) { target } else { t + dt };
                if !report.field.is_finite() {
                    return Err(KsError::NumericalBlowup { t });
                }
                u = report.field;
                traj.steps += 1;
                traj.clipped_mass += report.clipped_mass;
                if linf_prev > 0.0 {
                    traj.worst_negative = traj.worst_negative.min(report.min_before_clip / linf_prev);
                }
                let l1 = u.norm_l1();
                let linf = u.norm_linf();
                traj.sup_linf = traj.sup_linf.max(linf);
                if monitor.observe(t, l1, linf) {
                    let norms = self.norms(&u, opts.r, None);
                    traj.snapshots.push(Snapshot { t, field: u, norms });
                    traj.monitor = monitor;
                    traj.t_reached = t;
                    return Ok(traj);
                }
            }
            let norms = self.norms(&u, opts.r, None);
            traj.sup_kconv_linf = traj.sup_kconv_linf.max(norms.kconv_linf);
            traj.snapshots.push(Snapshot {
                t: target,
                field: u.clone(),
                norms,
            });
        }
        traj.t_reached = t;
        traj.monitor = monitor;
        Ok(traj)
    }
}

fn kconv_magnitude(kconv: &[Vec<f64>]) -> f64 {
    let n = kconv.first().map_or(0, |c| c.len());
    (0..n)
        .map(|i| kconv.iter().map(|c| c[i] * c[i]).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// `e^{t Delta} f`.
pub fn heat_step(spectral: &Spectral, f: &GridField, t: f64) -> Result<GridField> {
    if !(t >= 0.0) {
        return Err(invalid("t", "must be non-negative"));
    }
    if f.grid() != spectral.grid() {
        return Err(KsError::GridMismatch);
    }
    Ok(spectral.heat(f, t))
}

/// `sup_t ||u_t||_inf + sup_t ||K * u_t||_inf` over the snapshots.
pub fn compute_a_t(traj: &Trajectory) -> Result<f64> {
    if let Some(t) = traj.monitor.triggered_at {
        return Err(KsError::BlowupTrajectory { t });
    }
    let sup_u = traj.snapshots.iter().map(|s| s.norms.linf).fold(0.0, f64::max);
    let sup_k = traj.snapshots.iter().map(|s| s.norms.kconv_linf).fold(0.0, f64::max);
    Ok(sup_u + sup_k)
}

/// Same sum, over every integrator step rather than the snapshots.
pub fn running_a_t(traj: &Trajectory) -> Result<f64> {
    if let Some(t) = traj.monitor.triggered_at {
        return Err(KsError::BlowupTrajectory { t });
    }
    Ok(traj.sup_linf + traj.sup_kconv_linf)
}

/// Normalized Gaussian of total mass `mass` and per-coordinate variance `sigma^2`.
pub fn gaussian(grid: &Grid, mass: f64, sigma: f64, center: &[f64]) -> GridField {
    let d = grid.d() as i32;
    let norm = mass / (2.0 * std::f64::consts::PI * sigma * sigma).powf(d as f64 / 2.0);
    grid.sample(|x| {
        let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
        norm * (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(m: usize, l: f64) -> Grid {
        Grid::new(2, m, l).unwrap()
    }

    #[test]
    fn regime_flag() {
        assert!(PdeParams::new(2, 10.0, 0.0, 0.1).unwrap().global_regime());
        assert!(!PdeParams::new(2, 10.0, 0.0, 0.0).unwrap().global_regime());
        assert!(PdeParams::new(3, 3.0, 0.0, 1.01).unwrap().global_regime());
        assert!(!PdeParams::new(3, 3.0, 0.0, 1.0).unwrap().global_regime());
        assert!(PdeParams::new(2, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn heat_at_zero_time_is_identity() {
        let g = grid2(64, 4.0);
        let sp = Spectral::new(g);
        let f = gaussian(&g, 1.0, 0.5, &[0.3, -0.2]);
        let out = heat_step(&sp, &f, 0.0).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_of_a_discrete_delta() {
        let g = grid2(256, 4.0);
        let sp = Spectral::new(g);
        let mut f = GridField::zeros(g);
        let center = g.flatten(&[128, 128]);
        f.values_mut()[center] = 1.0 / g.cell_volume();
        let out = heat_step(&sp, &f, 0.05).unwrap();
        let peak = out.values()[center];
        let expect = 1.0 / (4.0 * std::f64::consts::PI * 0.05);
        assert!((peak / expect - 1.0).abs() < 0.02, "peak {peak} vs {expect}");
        assert!((out.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_variance_grows_by_2t() {
        let g = grid2(128, 4.0);
        let sp = Spectral::new(g);
        let f = gaussian(&g, 1.0, 0.4, &[0.0, 0.0]);
        let t = 0.07;
        let out = heat_step(&sp, &f, t).unwrap();
        let exact = gaussian(&g, 1.0, (0.16f64 + 2.0 * t).sqrt(), &[0.0, 0.0]);
        let err = out.sub(&exact).unwrap().norm_lp(2.0) / exact.norm_lp(2.0);
        assert!(err < 1e-6, "{err}");
        assert!((out.integral() / f.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_without_sources_is_heat() {
        let g = grid2(64, 4.0);
        let solver = MildSolver::new(g, PdeParams::new(2, 0.0, 0.0, 0.0).unwrap()).unwrap();
        let u = gaussian(&g, 1.0, 0.5, &[0.0, 0.0]);
        let dt = solver.dt_max(&u);
        let a = solver.step_mild(&u, dt).unwrap().field;
        let b = heat_step(solver.spectral(), &u, dt).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn step_rejects_unstable_dt() {
        let g = grid2(32, 4.0);
        let solver = MildSolver::new(g, PdeParams::new(2, 1.0, 0.0, 0.0).unwrap()).unwrap();
        let u = gaussian(&g, 1.0, 0.5, &[0.0, 0.0]);
        assert!(matches!(solver.step_mild(&u, 1.0), Err(KsError::StepTooLarge { .. })));
    }

    fn logistic(c: f64, nu: f64, mu: f64, t: f64) -> f64 {
        let e = (nu * t).exp();
        nu * c * e / (nu + mu * c * (e - 1.0))
    }

    fn logistic_error(c: f64, dt: f64) -> f64 {
        let g = grid2(8, 1.0);
        let solver = MildSolver::new(g, PdeParams::new(2, 0.0, 1.0, 2.0).unwrap()).unwrap();
        let opts = SolveOptions {
            t_end: 1.0,
            dt,
            snapshot_times: vec![],
            r: 4.0,
        };
        let traj = solver
            .solve(&GridField::constant(g, c), &opts, BlowupMonitor::with_threshold(f64::INFINITY))
            .unwrap();
        let exact = logistic(c, 1.0, 2.0, 1.0);
        traj.last().field.values().iter().map(|v| (v - exact).abs() / exact).fold(0.0, f64::max)
    }

    #[test]
    fn logistic_constant_state() {
        // c = nu / mu is the stable equilibrium
        assert!(logistic_error(0.5, 1e-4) <= 1e-6);
    }

    #[test]
    fn logistic_converges_at_first_order() {
        let e1 = logistic_error(0.1, 2e-4);
        let e2 = logistic_error(0.1, 1e-4);
        let ratio = e1 / e2;
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
        assert!(e2 < 2e-5, "{e2}");
    }

    #[test]
    fn chemotaxis_conserves_mass() {
        let g = grid2(64, 4.0);
        let solver = MildSolver::new(g, PdeParams::new(2, 1.0, 0.0, 0.0).unwrap()).unwrap();
        let u0 = gaussian(&g, 1.0, 0.5, &[0.0, 0.0]);
        let opts = SolveOptions {
            t_end: 0.2,
            dt: 1e-3,
            snapshot_times: vec![],
            r: 4.0,
        };
        let traj = solver.solve(&u0, &opts, BlowupMonitor::relative_to(&u0, 1e4)).unwrap();
        let drift = (traj.last().field.integral() - u0.integral()).abs();
        assert!(drift <= 1e-8 * 0.2 + traj.clipped_mass, "{drift}");
        assert!(traj.clipped_mass < 1e-6 * 0.2);
    }

    #[test]
    fn zero_duration_run() {
        let g = grid2(16, 2.0);
        let solver = MildSolver::new(g, PdeParams::new(2, 1.0, 1.0, 1.0).unwrap()).unwrap();
        let u0 = gaussian(&g, 1.0, 0.5, &[0.0, 0.0]);
        let opts = SolveOptions {
            t_end: 0.0,
            dt: 1e-3,
            snapshot_times: vec![],
            r: 4.0,
        };
        let traj = solver.solve(&u0, &opts, BlowupMonitor::relative_to(&u0, 1e4)).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert!(!traj.monitor.fired());
    }

    #[test]
    fn a_t_of_simple_trajectories() {
        let g = grid2(16, 2.0);
        let solver = MildSolver::new(g, PdeParams::new(2, 0.0, 0.0, 0.0).unwrap()).unwrap();
        let opts = SolveOptions {
            t_end: 0.1,
            dt: 1e-3,
            snapshot_times: vec![0.05],
            r: 4.0,
        };
        let zero = solver
            .solve(&GridField::zeros(g), &opts, BlowupMonitor::with_threshold(1.0))
            .unwrap();
        assert_eq!(compute_a_t(&zero).unwrap(), 0.0);
        let c = solver
            .solve(&GridField::constant(g, 0.7), &opts, BlowupMonitor::with_threshold(1e9))
            .unwrap();
        assert!((compute_a_t(&c).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn a_t_refuses_blown_up_runs() {
        let mut m = BlowupMonitor::with_threshold(1.0);
        m.observe(0.3, 2.0, 0.0);
        let g = grid2(4, 1.0);
        let traj = Trajectory {
            params: PdeParams::new(2, 0.0, 0.0, 0.0).unwrap(),
            snapshots: vec![],
            monitor: m,
            r: 4.0,
            sup_linf: 0.0,
            sup_kconv_linf: 0.0,
            clipped_mass: 0.0,
            worst_negative: 0.0,
            steps: 0,
            t_reached: 0.3,
        };
        let _ = g;
        assert!(matches!(compute_a_t(&traj), Err(KsError::BlowupTrajectory { .. })));
    }
}
