use statrs::distribution::{ContinuousCDF, Normal};

use ks_core::config::SimConfig;
use ks_core::harness::run_experiment;
use ks_core::kernel::{CoulombKernel, KernelTable, Mollifier};
use ks_core::particles::{demographic_step, ParticleParams, ParticleSystem, Population, UniformDensity};

fn params(nu: f64, mu: f64, a: f64, dt: f64) -> ParticleParams {
    ParticleParams {
        d: 2,
        chi: 0.0,
        nu,
        mu,
        alpha: 1.0 / 6.0,
        cutoff_a: a,
        dt,
        max_particles_factor: 64.0,
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn final_masses(p: &ParticleParams, c: f64, n: usize, steps: usize, reps: u64, seed0: u64) -> Vec<f64> {
    (0..reps)
        .map(|rep| {
            let mut pop = Population::from_positions(2, &vec![0.0; 2 * n], seed0 + rep).unwrap();
            for _ in 0..steps {
                demographic_step(&mut pop, &UniformDensity(c), p, p.dt).unwrap();
            }
            pop.mass()
        })
        .collect()
}

#[test]
fn discrete_yule_mean() {
    // each step: one child w.p. 1 - e^{-nu dt}
    let (nu, dt, steps) = (1.0, 0.01, 50);
    let p = params(nu, 0.0, 2.0, dt);
    let (m, se) = mean_se(&final_masses(&p, 0.0, 200, steps, 100, 1));
    let exact = (2.0 - (-nu * dt).exp()).powi(steps as i32);
    assert!(((m - exact) / se).abs() < 4.0, "{m} vs {exact} (se {se})");
}

#[test]
fn frozen_density_thinning() {
    let (mu, dt, steps) = (1.0, 0.01, 50);
    for (c, a) in [(0.5, 2.0), (5.0, 2.0)] {
        // death intensity mu (c ^ A)
        let p = params(0.0, mu, a, dt);
        let (m, se) = mean_se(&final_masses(&p, c, 200, steps, 60, 100));
        let exact = (-mu * c.min(a) * dt * steps as f64).exp();
        assert!(((m - exact) / se).abs() < 4.0, "c = {c}: {m} vs {exact} (se {se})");
    }
}

#[test]
fn single_particle_positions_are_gaussian() {
    let dt = 0.01;
    let steps = 10;
    let p = params(0.0, 0.0, 2.0, dt);
    let moll = Mollifier::new(2, p.alpha, 1).unwrap();
    let table = KernelTable::build(CoulombKernel::new(2).unwrap(), &moll, 8.0, moll.radius() / 8.0).unwrap();
    let sys = ParticleSystem::new(p, &table, moll).unwrap();
    let mut xs: Vec<f64> = (0..2000u64)
        .map(|s| {
            let mut pop = Population::from_positions(2, &[0.0, 0.0], 7_000 + s).unwrap();
            for _ in 0..steps {
                sys.step(&mut pop, dt).unwrap();
            }
            pop.particles()[0].position()[0]
        })
        .collect();
    xs.sort_by(f64::total_cmp);
    let law = Normal::new(0.0, (2.0 * dt * steps as f64).sqrt()).unwrap();
    let n = xs.len() as f64;
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the Kolmogorov distribution
    assert!(ks * n.sqrt() < 1.63, "KS statistic {ks}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let text = "
[pde]
m = 64
l = 3.0
dt = 2e-3
t_end = 0.02

[particles]
dt = 0.01
table_cells_per_radius = 8.0

[experiment]
n_values = [40, 80, 160]
replicas = 2
checkpoints = 2
kr_side = 12
";
    let one = SimConfig::from_toml_str(text, &["experiment.threads=1".into()]).unwrap();
    let two = SimConfig::from_toml_str(text, &["experiment.threads=2".into()]).unwrap();
    let a = run_experiment(&one.experiment_plan().unwrap()).unwrap();
    let b = run_experiment(&two.experiment_plan().unwrap()).unwrap();
    assert_eq!(a.cells, b.cells);
    assert_eq!(a.per_n, b.per_n);
}
