//! Run configuration: TOML with `[pde]`, `[particles]` and `[experiment]`
//! sections, dotted `section.key=value` overrides and the `KS_SEED`
//! environment variable.
//!
//! Particle rates `chi`, `nu`, `mu` default to the `[pde]` values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::grid::Grid;
use crate::harness::ExperimentPlan;
use crate::kernel::{CoulombKernel, KernelTable, Mollifier};
use crate::particles::{sample_initial, ParticleParams, ParticleSnapshot, ParticleSystem, Population};
use crate::pde::{gaussian, BlowupMonitor, MildSolver, PdeParams, SolveOptions, Trajectory, DEFAULT_THRESHOLD_FACTOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSection {
    pub d: usize,
    pub chi: f64,
    pub nu: f64,
    pub mu: f64,
    /// Nodes per axis.
    pub m: usize,
    /// Half width `L` of the box `[-L, L]^d`.
    pub l: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Extra snapshot times.
    pub snapshots: Vec<f64>,
    pub init_mass: f64,
    pub init_sigma: f64,
    pub r: f64,
    pub blowup_factor: f64,
    /// Write every snapshot field as CSV.
    pub write_fields: bool,
}

impl Default for PdeSection {
    fn default() -> Self {
        Self {
            d: 2,
            chi: 1.0,
            nu: 0.1,
            mu: 1.0,
            m: 128,
            l: 4.0,
            dt: 1e-3,
            t_end: 0.25,
            snapshots: Vec::new(),
            init_mass: 1.0,
            init_sigma: 0.5,
            r: 8.0,
            blowup_factor: DEFAULT_THRESHOLD_FACTOR,
            write_fields: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticlesSection {
    pub n: usize,
    pub alpha: f64,
    pub chi: Option<f64>,
    pub nu: Option<f64>,
    pub mu: Option<f64>,
    pub cutoff_a: f64,
    pub dt: f64,
    pub seed: u64,
    pub max_particles_factor: f64,
    pub table_cells_per_radius: f64,
}

impl Default for ParticlesSection {
    fn default() -> Self {
        Self {
            n: 1000,
            alpha: 1.0 / 6.0,
            chi: None,
            nu: None,
            mu: None,
            cutoff_a: 2.0,
            dt: 0.005,
            seed: 1,
            max_particles_factor: 64.0,
            table_cells_per_radius: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_values: Vec<usize>,
    pub replicas: usize,
    pub checkpoints: usize,
    pub gamma: f64,
    pub moment: f64,
    pub seed_root: u64,
    pub kr_side: usize,
    pub reference_check: bool,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            n_values: vec![250, 500, 1000, 2000],
            replicas: 20,
            checkpoints: 8,
            gamma: 0.5,
            moment: 2.0,
            seed_root: 2024,
            kr_side: 64,
            reference_check: false,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub pde: PdeSection,
    pub particles: ParticlesSection,
    pub experiment: ExperimentSection,
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `section.key=value`; the value is read as a TOML literal, or as a
/// bare string if it does not parse.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| KsError::Config(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.len() != 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(KsError::Config(format!("override key `{key}` must be section.key")));
    }
    let section = table
        .entry(parts[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let section = section
        .as_table_mut()
        .ok_or_else(|| KsError::Config(format!("`{}` is not a section", parts[0])))?;
    section.insert(parts[1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl SimConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| KsError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: SimConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| KsError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads `path`, applies overrides, then `KS_SEED` if set.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KsError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        if let Ok(seed) = std::env::var("KS_SEED") {
            let seed: u64 = seed
                .trim()
                .parse()
                .map_err(|_| KsError::Config(format!("KS_SEED=`{seed}` is not an unsigned integer")))?;
            cfg.apply_seed(seed);
        }
        Ok(cfg)
    }

    /// Sets both the experiment root seed and the particle seed.
    pub fn apply_seed(&mut self, seed: u64) {
        self.experiment.seed_root = seed;
        self.particles.seed = seed;
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| KsError::Config(e.to_string()))
    }

    pub fn pde_params(&self) -> Result<PdeParams> {
        let p = &self.pde;
        PdeParams::new(p.d, p.chi, p.nu, p.mu).map_err(|e| KsError::Config(format!("[pde] {e}")))
    }

    pub fn particle_params(&self) -> Result<ParticleParams> {
        let p = &self.particles;
        let params = ParticleParams {
            d: self.pde.d,
            chi: p.chi.unwrap_or(self.pde.chi),
            nu: p.nu.unwrap_or(self.pde.nu),
            mu: p.mu.unwrap_or(self.pde.mu),
            alpha: p.alpha,
            cutoff_a: p.cutoff_a,
            dt: p.dt,
            max_particles_factor: p.max_particles_factor,
        };
        params.validate().map_err(|e| KsError::Config(format!("[particles] {e}")))?;
        Ok(params)
    }

    pub fn experiment_plan(&self) -> Result<ExperimentPlan> {
        let e = &self.experiment;
        let plan = ExperimentPlan {
            pde: self.pde_params()?,
            particles: self.particle_params()?,
            grid_side: self.pde.m,
            half_width: self.pde.l,
            init_sigma: self.pde.init_sigma,
            pde_dt: self.pde.dt,
            t_end: self.pde.t_end,
            checkpoints: e.checkpoints,
            n_values: e.n_values.clone(),
            replicas: e.replicas,
            r: self.pde.r,
            gamma: e.gamma,
            moment: e.moment,
            seed_root: e.seed_root,
            kr_side: e.kr_side,
            table_cells_per_radius: self.particles.table_cells_per_radius,
            blowup_factor: self.pde.blowup_factor,
            reference_check: e.reference_check,
            threads: e.threads,
        };
        if (self.pde.init_mass - 1.0).abs() > 1e-12 {
            return Err(KsError::Config("[pde] init_mass must be 1 for experiments".into()));
        }
        plan.validate().map_err(|e| KsError::Config(format!("[experiment] {e}")))?;
        Ok(plan)
    }

    pub fn grid(&self) -> Result<Grid> {
        let p = &self.pde;
        Grid::new(p.d, p.m, p.l).map_err(|e| KsError::Config(format!("[pde] {e}")))
    }

    /// Centred Gaussian of mass `init_mass` and width `init_sigma`.
    pub fn initial_field(&self) -> Result<crate::grid::GridField> {
        let p = &self.pde;
        Ok(gaussian(&self.grid()?, p.init_mass, p.init_sigma, &vec![0.0; p.d]))
    }

    /// Mild solution from the Gaussian initial datum; a fired monitor is
    /// reported in the trajectory, not as an error.
    pub fn solve_pde(&self) -> Result<Trajectory> {
        let p = &self.pde;
        let u0 = self.initial_field()?;
        let solver = MildSolver::new(self.grid()?, self.pde_params()?)?;
        let opts = SolveOptions {
            t_end: p.t_end,
            dt: p.dt,
            snapshot_times: p.snapshots.clone(),
            r: p.r,
        };
        solver.solve(&u0, &opts, BlowupMonitor::relative_to(&u0, p.blowup_factor))
    }

    /// `particles.n` particles drawn from the normalised initial datum, run
    /// to `pde.t_end`. Densities are sampled on the PDE grid when
    /// `write_fields` is set.
    pub fn simulate_particles(&self) -> Result<Vec<ParticleSnapshot>> {
        let params = self.particle_params()?;
        let p = &self.pde;
        let n = self.particles.n;
        let grid = self.grid()?;
        let u0 = gaussian(&grid, 1.0, p.init_sigma, &vec![0.0; p.d]);
        let moll = Mollifier::new(p.d, params.alpha, n)?;
        let h_table = moll.radius() / self.particles.table_cells_per_radius.max(8.0);
        let table = KernelTable::build(CoulombKernel::new(p.d)?, &moll, 2.0 * p.l, h_table)?;
        let seed = self.particles.seed;
        let pop = Population::from_positions(p.d, &sample_initial(&u0, n, seed)?, seed)?;
        let mut sys = ParticleSystem::new(params, &table, moll)?;
        sys.warn_radius = Some(p.l / 2.0);
        sys.simulate(pop, p.t_end, &p.snapshots, p.write_fields.then_some(&grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_inheritance() {
        let cfg = SimConfig::from_toml_str("[pde]\nchi = 3.0\n", &[]).unwrap();
        assert_eq!(cfg.pde.chi, 3.0);
        assert_eq!(cfg.particle_params().unwrap().chi, 3.0);
        assert_eq!(cfg.pde.m, 128);
    }

    #[test]
    fn overrides_parse_typed_values() {
        let o = vec![
            "pde.mu=0".to_string(),
            "experiment.n_values=[10, 20, 40]".to_string(),
            "particles.chi = 0.5".to_string(),
        ];
        let cfg = SimConfig::from_toml_str("[pde]\nmu = 1.0\n", &o).unwrap();
        assert_eq!(cfg.pde.mu, 0.0);
        assert_eq!(cfg.experiment.n_values, vec![10, 20, 40]);
        assert_eq!(cfg.particle_params().unwrap().chi, 0.5);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = SimConfig::from_toml_str("[pde]\nchii = 1.0\n", &[]).unwrap_err();
        assert!(err.to_string().contains("chii"), "{err}");
        let err = SimConfig::from_toml_str("", &["pde.kappa=1".into()]).unwrap_err();
        assert!(err.to_string().contains("kappa"), "{err}");
        assert!(SimConfig::from_toml_str("", &["nodot=1".into()]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let o = vec!["pde.mu=0.25".to_string(), "experiment.threads=2".to_string()];
        let cfg = SimConfig::from_toml_str("[pde]\nchi = 10.0\n", &o).unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(SimConfig::from_toml_str(&text, &[]).unwrap(), cfg);
    }
}
