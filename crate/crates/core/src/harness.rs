//! Paired PDE / particle runs over a range of `N`, error curves and rate fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, KsError, Result};
use crate::grid::{Grid, GridField};
use crate::kernel::{CoulombKernel, KernelTable, Mollifier};
use crate::measure::{bessel_norm, error_l1lr, KrEstimator, NormSpec};
use crate::particles::{sample_initial, ParticleParams, ParticleSystem, Population};
use crate::pde::{compute_a_t, gaussian, running_a_t, BlowupMonitor, MildSolver, PdeParams, SolveOptions, Trajectory};
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `alpha (gamma - d/r)`
    First,
    /// `(1 - 2 alpha d (1 - 1/r)) / 2`
    Second,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::First => "first",
            Branch::Second => "second",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rho {
    pub value: f64,
    pub first: f64,
    pub second: f64,
    pub branch: Branch,
}

/// `rho = min(alpha (gamma - d/r), (1 - 2 alpha d (1 - 1/r)) / 2)`.
pub fn theoretical_rho(d: usize, alpha: f64, gamma: f64, r: f64) -> Result<Rho> {
    let df = d as f64;
    if !(r > df) {
        return Err(KsError::AssumptionViolated(format!("r > d fails: r = {r}, d = {d}")));
    }
    if !(gamma >= df / r - 1e-15 && gamma < 1.0) {
        return Err(KsError::AssumptionViolated(format!(
            "d/r <= gamma < 1 fails: gamma = {gamma}, d/r = {}",
            df / r
        )));
    }
    let alpha_max = 1.0 / (2.0 * (df + gamma - df / r));
    if !(alpha > 0.0 && alpha < alpha_max) {
        return Err(KsError::AssumptionViolated(format!(
            "0 < alpha < 1/(2(d + gamma - d/r)) = {alpha_max} fails: alpha = {alpha}"
        )));
    }
    let first = (alpha * (gamma - df / r)).max(0.0);
    let second = 0.5 * (1.0 - 2.0 * alpha * df * (1.0 - 1.0 / r));
    let branch = if first <= second { Branch::First } else { Branch::Second };
    Ok(Rho {
        value: first.min(second),
        first,
        second,
        branch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// 95% Student-t interval.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub points: usize,
}

/// Least squares of `log err` on `log N`.
pub fn fit_slope(ns: &[f64], errors: &[f64]) -> Result<SlopeFit> {
    if ns.len() != errors.len() {
        return Err(KsError::DegenerateFit("N and error counts differ".into()));
    }
    let mut distinct: Vec<f64> = ns.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(KsError::DegenerateFit(format!("{} distinct N values, need 3", distinct.len())));
    }
    if let Some(bad) = ns.iter().chain(errors).find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(KsError::DegenerateFit(format!("non-positive value {bad}")));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = n - 2.0;
    let stderr = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| KsError::DegenerateFit(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        ci_lo: slope - t * stderr,
        ci_hi: slope + t * stderr,
        points: x.len(),
    })
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub pde: PdeParams,
    /// Shared particle parameters; `dt` is rounded down onto the checkpoints.
    pub particles: ParticleParams,
    pub grid_side: usize,
    pub half_width: f64,
    /// Initial datum: centered Gaussian of unit mass.
    pub init_sigma: f64,
    pub pde_dt: f64,
    pub t_end: f64,
    pub checkpoints: usize,
    pub n_values: Vec<usize>,
    pub replicas: usize,
    pub r: f64,
    pub gamma: f64,
    /// Exponent of the moment over replicas.
    pub moment: f64,
    pub seed_root: u64,
    pub kr_side: usize,
    pub table_cells_per_radius: f64,
    pub blowup_factor: f64,
    /// Also solve at twice the resolution and report the difference.
    pub reference_check: bool,
    pub threads: Option<usize>,
}

impl ExperimentPlan {
    /// `linspace(0, t_end, checkpoints)`, deduplicated.
    pub fn checkpoint_times(&self) -> Vec<f64> {
        if self.checkpoints <= 1 || self.t_end == 0.0 {
            return if self.t_end == 0.0 { vec![0.0] } else { vec![0.0, self.t_end] };
        }
        let k = self.checkpoints - 1;
        (0..=k).map(|i| self.t_end * i as f64 / k as f64).collect()
    }

    /// Particle step that divides every checkpoint interval.
    pub fn particle_dt(&self) -> f64 {
        let times = self.checkpoint_times();
        if times.len() < 2 {
            return self.particles.dt;
        }
        let interval = times[1] - times[0];
        let steps = (interval / self.particles.dt - 1e-9).ceil().max(1.0);
        interval / steps
    }

    pub fn validate(&self) -> Result<()> {
        if self.pde.d != self.particles.d {
            return Err(invalid("d", "pde and particle dimensions differ"));
        }
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        if !same(self.pde.chi, self.particles.chi) || !same(self.pde.nu, self.particles.nu) || !same(self.pde.mu, self.particles.mu) {
            return Err(invalid("chi/nu/mu", "pde and particle rates must agree"));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(invalid("n_values", "need at least one positive N"));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        if !(self.t_end >= 0.0) {
            return Err(invalid("t_end", "must be non-negative"));
        }
        if !(self.moment >= 1.0) {
            return Err(invalid("moment", "must be at least 1"));
        }
        if !(self.init_sigma > 0.0) {
            return Err(invalid("init_sigma", "must be positive"));
        }
        self.particles.validate()?;
        NormSpec::new(self.pde.d, self.r, self.gamma)?;
        theoretical_rho(self.pde.d, self.particles.alpha, self.gamma, self.r)?;
        Ok(())
    }
}

/// One `(N, replica, t)` measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub t: f64,
    pub err_l1: f64,
    pub err_lr: f64,
    pub err_l1lr: f64,
    /// Flat distance from the particles to the PDE solution.
    pub kr_mu_vs_u: f64,
    /// Flat distance from the particles to their own mollification.
    pub kr_gap_mollif: f64,
    pub kr_lp_gap: f64,
    pub mass: f64,
    /// `<mu^N_t, |x|^2>`.
    pub second_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub replica: usize,
    pub seed: u64,
    pub records: Vec<ErrorRecord>,
    /// `||u^N_0||_{gamma, r}`.
    pub bessel_init: f64,
    pub births: u64,
    pub deaths: u64,
}

impl CellResult {
    pub fn sup_error(&self) -> f64 {
        self.records.iter().map(|r| r.err_l1lr).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    /// Median over replicas of the sup-over-checkpoints error.
    pub median_sup: f64,
    pub q10_sup: f64,
    pub q90_sup: f64,
    /// `(E sup_t err^m)^{1/m}` over replicas.
    pub moment_sup: f64,
    /// `max_t E[(m^N_t)^q]` for `q = 1, 2, 4`.
    pub mass_moments: [f64; 3],
    /// `E sup_t <mu^N_t, |x|^2>`.
    pub spatial_moment: f64,
    pub bessel_init_mean: f64,
    /// Snapshots where the mollification gap exceeded `N^{-alpha} m^N_t`.
    pub kr_bound_violations: usize,
    /// Snapshots where `kr(mu, u) > kr(mu, u^N) + ||u^N - u||_1`.
    pub triangle_violations: usize,
    pub max_kr_gap_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    /// `None` for the sup over checkpoints.
    pub t: Option<f64>,
    pub fit: Option<SlopeFit>,
    pub medians: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub plan: ExperimentPlan,
    pub checkpoints: Vec<f64>,
    pub particle_dt: f64,
    pub a_t: f64,
    pub a_t_snapshots: f64,
    pub rho: Rho,
    pub pde_steps: usize,
    pub pde_clipped_mass: f64,
    /// `||u_M - u_{2M}||_{L^1 cap L^r}` per checkpoint when requested.
    pub pde_resolution_error: Vec<(f64, f64)>,
    pub cells: Vec<CellResult>,
    pub per_n: Vec<NSummary>,
    pub rates: Vec<RateRow>,
    /// Set when fewer than three `N` values make the slope undefined.
    pub slope_undefined: bool,
}

impl RateReport {
    pub fn sup_fit(&self) -> Option<&SlopeFit> {
        self.rates.iter().find(|r| r.t.is_none()).and_then(|r| r.fit.as_ref())
    }
}

/// Seed of cell `(n, replica)`.
pub fn cell_seed(seed_root: u64, n: usize, replica: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(b"ks-cell");
    h.update(seed_root.to_le_bytes());
    h.update((n as u64).to_le_bytes());
    h.update((replica as u64).to_le_bytes());
    let out: [u8; 32] = h.finalize().into();
    u64::from_le_bytes(out[..8].try_into().expect("eight bytes"))
}

/// Median and the two outer deciles by linear interpolation.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

struct Reference {
    grid: Grid,
    traj: Trajectory,
}

fn solve_reference(plan: &ExperimentPlan, grid: Grid, times: &[f64]) -> Result<Reference> {
    let solver = MildSolver::new(grid, plan.pde)?;
    let u0 = gaussian(&grid, 1.0, plan.init_sigma, &vec![0.0; grid.d()]);
    let opts = SolveOptions {
        t_end: plan.t_end,
        dt: plan.pde_dt,
        snapshot_times: times.to_vec(),
        r: plan.r,
    };
    let traj = solver.solve(&u0, &opts, BlowupMonitor::relative_to(&u0, plan.blowup_factor))?;
    if let Some(t) = traj.monitor.triggered_at {
        return Err(KsError::BlowupTrajectory { t });
    }
    Ok(Reference { grid, traj })
}

struct Level {
    n: usize,
    moll: Mollifier,
    table: KernelTable,
}

fn run_cell(
    plan: &ExperimentPlan,
    level: &Level,
    reference: &Reference,
    times: &[f64],
    kr: &KrEstimator,
    spectral: &Spectral,
    replica: usize,
) -> Result<CellResult> {
    let seed = cell_seed(plan.seed_root, level.n, replica);
    let wrap = |e: KsError| KsError::Cell {
        n: level.n,
        replica,
        seed,
        source: Box::new(e),
    };
    let spec = NormSpec::new(plan.pde.d, plan.r, plan.gamma).map_err(wrap)?;
    let u0 = &reference.traj.snapshots[0].field;
    let x0 = sample_initial(u0, level.n, seed).map_err(wrap)?;
    let pop = Population::from_positions(plan.pde.d, &x0, seed).map_err(wrap)?;
    let mut params = plan.particles;
    params.dt = plan.particle_dt();
    let mut sys = ParticleSystem::new(params, &level.table, level.moll.clone()).map_err(wrap)?;
    sys.warn_radius = Some(plan.half_width / 2.0);
    let snaps = sys
        .simulate(pop, plan.t_end, times, Some(&reference.grid))
        .map_err(wrap)?;
    let mut records = Vec::with_capacity(times.len());
    let mut bessel_init = 0.0;
    for &t in times {
        let snap = snaps
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * t.max(1.0))
            .ok_or_else(|| wrap(invalid("checkpoints", "particle snapshot missing")))?;
        let uref = &reference
            .traj
            .at(t)
            .ok_or_else(|| wrap(invalid("checkpoints", "reference snapshot missing")))?
            .field;
        let un = snap.density.as_ref().expect("grid supplied");
        if t == 0.0 {
            bessel_init = bessel_norm(spectral, un, plan.gamma, plan.r).map_err(wrap)?;
        }
        let err = error_l1lr(un, uref, &spec).map_err(wrap)?;
        let mu = snap.population.empirical();
        let vs_u = kr.measure_vs_field(&mu, uref).map_err(wrap)?;
        let gap = kr.measure_vs_field(&mu, un).map_err(wrap)?;
        let second_moment = mu.pair(|x| x.iter().map(|v| v * v).sum());
        records.push(ErrorRecord {
            t,
            err_l1: err.l1,
            err_lr: err.lr,
            err_l1lr: err.total(),
            kr_mu_vs_u: vs_u.value,
            kr_gap_mollif: gap.value,
            kr_lp_gap: vs_u.gap.max(gap.gap),
            mass: snap.population.mass(),
            second_moment,
        });
    }
    let last = &snaps.last().expect("at least the initial snapshot").population;
    Ok(CellResult {
        n: level.n,
        replica,
        seed,
        records,
        bessel_init,
        births: last.births,
        deaths: last.deaths,
    })
}

fn summarize(plan: &ExperimentPlan, n: usize, cells: &[&CellResult]) -> NSummary {
    let sups: Vec<f64> = cells.iter().map(|c| c.sup_error()).collect();
    let m = plan.moment;
    let reps = cells.len() as f64;
    let moment_sup = (sups.iter().map(|e| e.powf(m)).sum::<f64>() / reps).powf(1.0 / m);
    let k = cells.first().map_or(0, |c| c.records.len());
    let mut mass_moments = [0.0f64; 3];
    for (qi, q) in [1, 2, 4].into_iter().enumerate() {
        for ti in 0..k {
            let e = cells.iter().map(|c| c.records[ti].mass.powi(q)).sum::<f64>() / reps;
            mass_moments[qi] = mass_moments[qi].max(e);
        }
    }
    let spatial_moment = cells
        .iter()
        .map(|c| c.records.iter().map(|r| r.second_moment).fold(0.0, f64::max))
        .sum::<f64>()
        / reps;
    let radius = (n as f64).powf(-plan.particles.alpha);
    let mut kr_bound_violations = 0;
    let mut triangle_violations = 0;
    let mut max_kr_gap_ratio = 0.0f64;
    for c in cells {
        for r in &c.records {
            let bound = radius * r.mass;
            if r.mass > 0.0 {
                max_kr_gap_ratio = max_kr_gap_ratio.max(r.kr_gap_mollif / bound);
            }
            if r.kr_gap_mollif > bound * (1.0 + 1e-6) {
                kr_bound_violations += 1;
            }
            if r.kr_mu_vs_u > r.kr_gap_mollif + r.err_l1 + 1e-9 {
                triangle_violations += 1;
            }
        }
    }
    NSummary {
        n,
        median_sup: quantile(&sups, 0.5),
        q10_sup: quantile(&sups, 0.1),
        q90_sup: quantile(&sups, 0.9),
        moment_sup,
        mass_moments,
        spatial_moment,
        bessel_init_mean: cells.iter().map(|c| c.bessel_init).sum::<f64>() / reps,
        kr_bound_violations,
        triangle_violations,
        max_kr_gap_ratio,
    }
}

/// Runs every `(N, replica)` cell against one PDE reference.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<RateReport> {
    plan.validate()?;
    let d = plan.pde.d;
    let grid = Grid::new(d, plan.grid_side, plan.half_width)?;
    let times = plan.checkpoint_times();
    let rho = theoretical_rho(d, plan.particles.alpha, plan.gamma, plan.r)?;

    let reference = solve_reference(plan, grid, &times)?;
    let a_t = running_a_t(&reference.traj)?;
    let a_t_snapshots = compute_a_t(&reference.traj)?;
    if plan.particles.cutoff_a < a_t {
        return Err(KsError::CutoffBelowThreshold {
            a: plan.particles.cutoff_a,
            a_t,
        });
    }
    let mut pde_resolution_error = Vec::new();
    if plan.reference_check {
        let fine = solve_reference(plan, grid.refined(), &times)?;
        let spec = NormSpec::new(d, plan.r, plan.gamma)?;
        for &t in &times {
            let coarse = &reference.traj.at(t).expect("checkpoint").field;
            let fine_t = fine.traj.at(t).expect("checkpoint").field.subsample()?;
            pde_resolution_error.push((t, error_l1lr(coarse, &fine_t, &spec)?.total()));
        }
    }

    let kernel = CoulombKernel::new(d)?;
    let mut levels = Vec::with_capacity(plan.n_values.len());
    for &n in &plan.n_values {
        let moll = Mollifier::new(d, plan.particles.alpha, n)?;
        let h_table = moll.radius() / plan.table_cells_per_radius.max(8.0);
        let table = KernelTable::build(kernel, &moll, 2.0 * plan.half_width, h_table)?;
        levels.push(Level { n, moll, table });
    }
    let kr = KrEstimator::new(grid, plan.kr_side)?;
    let spectral = Spectral::new(grid);

    let jobs: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|li| (0..plan.replicas).map(move |rep| (li, rep)))
        .collect();
    let work = || {
        jobs.par_iter()
            .map(|&(li, rep)| run_cell(plan, &levels[li], &reference, &times, &kr, &spectral, rep))
            .collect::<Result<Vec<_>>>()
    };
    let cells = match plan.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| KsError::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let per_n: Vec<NSummary> = plan
        .n_values
        .iter()
        .map(|&n| {
            let mine: Vec<&CellResult> = cells.iter().filter(|c| c.n == n).collect();
            summarize(plan, n, &mine)
        })
        .collect();
    for s in &per_n {
        log::info!(
            "N = {}: median sup error {:.4e}, E m^q = {:?}, Bessel norm of u^N_0 {:.4e}",
            s.n,
            s.median_sup,
            s.mass_moments,
            s.bessel_init_mean
        );
    }

    let ns: Vec<f64> = plan.n_values.iter().map(|&n| n as f64).collect();
    let mut rates = Vec::with_capacity(times.len() + 1);
    let mut slope_undefined = false;
    let mut fit_row = |t: Option<f64>, medians: Vec<f64>| {
        let fit = fit_slope(&ns, &medians).ok();
        slope_undefined |= fit.is_none();
        rates.push(RateRow { t, fit, medians });
    };
    for (ti, &t) in times.iter().enumerate() {
        let medians = plan
            .n_values
            .iter()
            .map(|&n| {
                let v: Vec<f64> = cells.iter().filter(|c| c.n == n).map(|c| c.records[ti].err_l1lr).collect();
                quantile(&v, 0.5)
            })
            .collect();
        fit_row(Some(t), medians);
    }
    fit_row(None, per_n.iter().map(|s| s.median_sup).collect());

    Ok(RateReport {
        plan: plan.clone(),
        checkpoints: times,
        particle_dt: plan.particle_dt(),
        a_t,
        a_t_snapshots,
        rho,
        pde_steps: reference.traj.steps,
        pde_clipped_mass: reference.traj.clipped_mass,
        pde_resolution_error,
        cells,
        per_n,
        rates,
        slope_undefined,
    })
}

/// Mollification error of `N` i.i.d. samples: the `t = 0` error alone.
pub fn initial_error(u0: &GridField, moll: &Mollifier, seed: u64, spec: &NormSpec) -> Result<f64> {
    let x = sample_initial(u0, moll.n(), seed)?;
    let mu = crate::measure::EmpiricalMeasure::new(u0.grid().d(), moll.n(), x)?;
    let un = crate::measure::mollify(&mu, moll, u0.grid())?;
    Ok(error_l1lr(&un, u0, spec)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_examples() {
        let r = theoretical_rho(2, 1.0 / 6.0, 0.9, 100.0).unwrap();
        assert!((r.value - 0.146_666_666_666_666_7).abs() < 1e-12);
        assert!((r.second - 0.17).abs() < 1e-12);
        assert_eq!(r.branch, Branch::First);
        let edge = theoretical_rho(2, 0.1, 0.25, 8.0).unwrap();
        assert_eq!(edge.value, 0.0);
        let near = theoretical_rho(2, 1.0 / 6.0 - 1e-7, 1.0 - 1e-9, 1e9).unwrap();
        assert!((near.value - 1.0 / 6.0).abs() < 1e-5);
        for bad in [(2, 0.2, 0.9, 100.0), (2, 0.1, 0.1, 8.0), (2, 0.1, 0.5, 2.0), (2, 0.1, 1.0, 8.0)] {
            assert!(matches!(
                theoretical_rho(bad.0, bad.1, bad.2, bad.3),
                Err(KsError::AssumptionViolated(_))
            ));
        }
    }

    #[test]
    fn exact_power_law() {
        let ns = [250.0, 500.0, 1000.0, 2000.0];
        let e: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
        let f = fit_slope(&ns, &e).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        let flat = fit_slope(&ns, &[0.2; 4]).unwrap();
        assert!(flat.slope.abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits() {
        assert!(matches!(fit_slope(&[1.0, 2.0], &[1.0, 1.0]), Err(KsError::DegenerateFit(_))));
        assert!(matches!(
            fit_slope(&[1.0, 2.0, 4.0], &[1.0, 0.0, 1.0]),
            Err(KsError::DegenerateFit(_))
        ));
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[4.0, 1.0, 2.0, 3.0], 0.5), 2.5);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn cell_seeds_differ() {
        assert_ne!(cell_seed(1, 250, 0), cell_seed(1, 250, 1));
        assert_ne!(cell_seed(1, 250, 0), cell_seed(1, 500, 0));
        assert_eq!(cell_seed(7, 250, 3), cell_seed(7, 250, 3));
    }
}
