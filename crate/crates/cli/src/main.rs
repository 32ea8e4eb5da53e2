//! `ks`: run the mild solver, the particle simulator, the convergence
//! harness or the kernel invariant suite from a TOML config.
//!
//! Exit codes: 0 success, 1 kernel check failed, 2 config error,
//! 3 blow-up detected, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ks_core::config::SimConfig;
use ks_core::harness::{run_experiment, NSummary, RateReport, RateRow, Rho};
use ks_core::io::{
    write_errors_csv, write_field_snapshot, write_json, write_particle_snapshots, write_population_summary,
    write_rates_csv, write_trajectory_manifest,
};
use ks_core::kernel_check::{format_report, run_kernel_checks, KernelCheckOptions};
use ks_core::pde::compute_a_t;
use ks_core::KsError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "ks", version, about = "Keller-Segel with logistic damping: PDE, particles, rates")]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand)]
enum Mode {
    /// Mild solution with blow-up monitoring.
    Pde(RunArgs),
    /// Branching moderately interacting particles.
    Particles(RunArgs),
    /// Paired PDE / particle runs and rate fits.
    Experiment(RunArgs),
    /// Kernel, mollifier, table and cutoff invariants.
    KernelCheck(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// `section.key=value`, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value = "ks-out")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Nodes per axis for the spectral identity.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Fault injection: perturb one table sample.
    #[arg(long)]
    corrupt_table: bool,
}

enum Failure {
    CheckFailed,
    Error(KsError),
}

impl From<KsError> for Failure {
    fn from(e: KsError) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &KsError) -> u8 {
    match e {
        KsError::Cell { source, .. } => exit_code(source),
        KsError::Config(_)
        | KsError::InvalidParameter { .. }
        | KsError::AssumptionViolated(_)
        | KsError::CutoffBelowThreshold { .. }
        | KsError::ResolutionTooCoarse { .. }
        | KsError::UnsupportedDimension(_)
        | KsError::StepTooLarge { .. } => 2,
        KsError::BlowupTrajectory { .. } => 3,
        _ => 4,
    }
}

fn prepare(args: &RunArgs) -> Result<SimConfig, KsError> {
    let cfg = SimConfig::load(&args.config, &args.overrides)?;
    std::fs::create_dir_all(&args.out).map_err(|e| KsError::Io(format!("{}: {e}", args.out.display())))?;
    let resolved = args.out.join("resolved.toml");
    std::fs::write(&resolved, cfg.to_toml_string()?).map_err(|e| KsError::Io(format!("{}: {e}", resolved.display())))?;
    log::info!("resolved config written to {}", resolved.display());
    Ok(cfg)
}

#[derive(Serialize)]
struct PdeManifest<'a> {
    mode: &'static str,
    version: &'static str,
    config: &'a SimConfig,
    monitor_threshold: f64,
    triggered_at: Option<f64>,
    monitor_silent: bool,
    a_t: Option<f64>,
    sup_linf: f64,
    sup_kconv_linf: f64,
    steps: usize,
    t_reached: f64,
    clipped_mass: f64,
    global_regime: bool,
}

fn run_pde(args: &RunArgs) -> Result<(), Failure> {
    let cfg = prepare(args)?;
    let params = cfg.pde_params()?;
    let traj = cfg.solve_pde()?;
    let mut files = Vec::new();
    if cfg.pde.write_fields {
        for (i, s) in traj.snapshots.iter().enumerate() {
            let name = format!("u_{i:04}.csv");
            write_field_snapshot(&args.out.join(&name), s.t, &s.field, &params)?;
            files.push(name);
        }
    }
    write_trajectory_manifest(&traj, &files, &args.out.join("trajectory.csv"))?;
    let manifest = PdeManifest {
        mode: "pde",
        version: VERSION,
        config: &cfg,
        monitor_threshold: traj.monitor.threshold,
        triggered_at: traj.monitor.triggered_at,
        monitor_silent: !traj.monitor.fired(),
        a_t: compute_a_t(&traj).ok(),
        sup_linf: traj.sup_linf,
        sup_kconv_linf: traj.sup_kconv_linf,
        steps: traj.steps,
        t_reached: traj.t_reached,
        clipped_mass: traj.clipped_mass,
        global_regime: params.global_regime(),
    };
    write_json(&manifest, &args.out.join("manifest.json"))?;
    match traj.monitor.triggered_at {
        Some(t) => {
            eprintln!("blow-up detected: monitor fired at t = {t}");
            Err(KsError::BlowupTrajectory { t }.into())
        }
        None => {
            println!("monitor silent to t = {}; sup ||u||_inf = {:.6e}", traj.t_reached, traj.sup_linf);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ParticleManifest<'a> {
    mode: &'static str,
    version: &'static str,
    config: &'a SimConfig,
    seed: u64,
    snapshot_times: Vec<f64>,
    final_mass: f64,
    births: u64,
    deaths: u64,
    divisions: u64,
}

fn run_particles(args: &RunArgs) -> Result<(), Failure> {
    let cfg = prepare(args)?;
    let snaps = cfg.simulate_particles()?;
    let seed = cfg.particles.seed;
    write_particle_snapshots(&snaps, &args.out.join("particles.csv"))?;
    write_population_summary(&snaps, &args.out.join("population.csv"))?;
    if cfg.pde.write_fields {
        let pde = cfg.pde_params()?;
        for (i, s) in snaps.iter().enumerate() {
            if let Some(f) = &s.density {
                write_field_snapshot(&args.out.join(format!("uN_{i:04}.csv")), s.t, f, &pde)?;
            }
        }
    }
    let last = &snaps.last().expect("initial snapshot").population;
    let manifest = ParticleManifest {
        mode: "particles",
        version: VERSION,
        config: &cfg,
        seed,
        snapshot_times: snaps.iter().map(|s| s.t).collect(),
        final_mass: last.mass(),
        births: last.births,
        deaths: last.deaths,
        divisions: last.divisions,
    };
    write_json(&manifest, &args.out.join("manifest.json"))?;
    println!("t = {}: m^N = {:.4}, births {}, deaths {}", last.time, last.mass(), last.births, last.deaths);
    Ok(())
}

#[derive(Serialize)]
struct ExperimentManifest<'a> {
    mode: &'static str,
    version: &'static str,
    config: &'a SimConfig,
    checkpoints: &'a [f64],
    particle_dt: f64,
    a_t: f64,
    a_t_snapshots: f64,
    rho: Rho,
    pde_steps: usize,
    pde_resolution_error: &'a [(f64, f64)],
    cell_seeds: Vec<(usize, usize, u64)>,
    per_n: &'a [NSummary],
    rates: &'a [RateRow],
    slope_undefined: bool,
}

fn run_experiment_mode(args: &RunArgs) -> Result<(), Failure> {
    let cfg = prepare(args)?;
    let plan = cfg.experiment_plan()?;
    let report: RateReport = run_experiment(&plan)?;
    write_errors_csv(&report, &args.out.join("errors.csv"))?;
    write_rates_csv(&report, &args.out.join("rates.csv"))?;
    let manifest = ExperimentManifest {
        mode: "experiment",
        version: VERSION,
        config: &cfg,
        checkpoints: &report.checkpoints,
        particle_dt: report.particle_dt,
        a_t: report.a_t,
        a_t_snapshots: report.a_t_snapshots,
        rho: report.rho,
        pde_steps: report.pde_steps,
        pde_resolution_error: &report.pde_resolution_error,
        cell_seeds: report.cells.iter().map(|c| (c.n, c.replica, c.seed)).collect(),
        per_n: &report.per_n,
        rates: &report.rates,
        slope_undefined: report.slope_undefined,
    };
    write_json(&manifest, &args.out.join("manifest.json"))?;
    for s in &report.per_n {
        println!("N = {:>6}  median sup error {:.4e}", s.n, s.median_sup);
    }
    match report.sup_fit() {
        Some(f) => println!(
            "slope {:.4} (95% CI [{:.4}, {:.4}]), rho = {:.4} ({})",
            f.slope,
            f.ci_lo,
            f.ci_hi,
            report.rho.value,
            report.rho.branch.as_str()
        ),
        None => println!("slope undefined: fewer than 3 distinct N"),
    }
    Ok(())
}

fn run_check(args: &CheckArgs) -> Result<(), Failure> {
    let mut opts = KernelCheckOptions::default_for(args.d);
    if let Some(m) = args.m {
        opts.m = m;
    }
    if let Some(t) = args.tolerance {
        opts.tolerance = t;
    }
    opts.corrupt_table = args.corrupt_table;
    let results = run_kernel_checks(&opts).map_err(|e| match e {
        KsError::UnsupportedDimension(_) | KsError::InvalidParameter { .. } => {
            KsError::Config(format!("kernel-check: {e}"))
        }
        other => other,
    })?;
    print!("{}", format_report(&results));
    if results.iter().all(|r| r.passed) {
        Ok(())
    } else {
        for r in results.iter().filter(|r| !r.passed) {
            eprintln!("invariant failed: {}", r.name);
        }
        Err(Failure::CheckFailed)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.mode {
        Mode::Pde(a) => run_pde(a),
        Mode::Particles(a) => run_particles(a),
        Mode::Experiment(a) => run_experiment_mode(a),
        Mode::KernelCheck(a) => run_check(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::CheckFailed) => ExitCode::from(1),
        Err(Failure::Error(e)) => {
            let code = exit_code(&e);
            if code != 3 {
                eprintln!("error: {e}");
            }
            ExitCode::from(code)
        }
    }
}
