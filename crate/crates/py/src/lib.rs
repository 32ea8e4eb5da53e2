//! Python bindings: kernel evaluation, rate theory, slope fits, kernel
//! checks and small PDE / particle runs from a TOML string.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ks_core::config::SimConfig;
use ks_core::harness;
use ks_core::kernel::CoulombKernel;
use ks_core::kernel_check::{run_kernel_checks, KernelCheckOptions};
use ks_core::pde::compute_a_t;
use ks_core::KsError;

fn py_err(e: KsError) -> PyErr {
    match e {
        KsError::Config(_)
        | KsError::InvalidParameter { .. }
        | KsError::UnsupportedDimension(_)
        | KsError::AssumptionViolated(_)
        | KsError::DegenerateFit(_)
        | KsError::SingularOrigin { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// `K(x)` for the Coulomb kernel in `len(x)` dimensions.
#[pyfunction]
fn coulomb(x: Vec<f64>) -> PyResult<Vec<f64>> {
    CoulombKernel::new(x.len()).and_then(|k| k.eval(&x)).map_err(py_err)
}

/// `(rho, branch)` with branch `"first"` or `"second"`.
#[pyfunction]
fn theoretical_rho(d: usize, alpha: f64, gamma: f64, r: f64) -> PyResult<(f64, &'static str)> {
    let rho = harness::theoretical_rho(d, alpha, gamma, r).map_err(py_err)?;
    Ok((rho.value, rho.branch.as_str()))
}

/// Log-log OLS of `errors` against `ns`: `(slope, ci_lo, ci_hi)`.
#[pyfunction]
fn fit_slope(ns: Vec<f64>, errors: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = harness::fit_slope(&ns, &errors).map_err(py_err)?;
    Ok((f.slope, f.ci_lo, f.ci_hi))
}

/// `[(name, passed, value, tolerance)]` for the invariant suite.
#[pyfunction]
#[pyo3(signature = (d, corrupt_table = false))]
fn kernel_check(d: usize, corrupt_table: bool) -> PyResult<Vec<(String, bool, f64, f64)>> {
    let mut opts = KernelCheckOptions::default_for(d);
    opts.corrupt_table = corrupt_table;
    let res = run_kernel_checks(&opts).map_err(py_err)?;
    Ok(res.into_iter().map(|r| (r.name.to_string(), r.passed, r.value, r.tolerance)).collect())
}

fn load(config: &str, overrides: Vec<String>) -> PyResult<SimConfig> {
    SimConfig::from_toml_str(config, &overrides).map_err(py_err)
}

/// Solves the PDE described by a TOML config string and returns a summary.
#[pyfunction]
#[pyo3(signature = (config, overrides = Vec::new()))]
fn solve_pde<'py>(py: Python<'py>, config: &str, overrides: Vec<String>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load(config, overrides)?;
    let traj = py.detach(|| cfg.solve_pde()).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("triggered_at", traj.monitor.triggered_at)?;
    out.set_item("threshold", traj.monitor.threshold)?;
    out.set_item("a_t", compute_a_t(&traj).ok())?;
    out.set_item("sup_linf", traj.sup_linf)?;
    out.set_item("t_reached", traj.t_reached)?;
    out.set_item("times", traj.snapshots.iter().map(|s| s.t).collect::<Vec<_>>())?;
    out.set_item("mass", traj.snapshots.iter().map(|s| s.field.integral()).collect::<Vec<_>>())?;
    Ok(out)
}

/// Runs the particle system and returns final positions and mass.
#[pyfunction]
#[pyo3(signature = (config, overrides = Vec::new()))]
fn simulate<'py>(py: Python<'py>, config: &str, overrides: Vec<String>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load(config, overrides)?;
    let snaps = py.detach(|| cfg.simulate_particles()).map_err(py_err)?;
    let last = &snaps.last().expect("initial snapshot").population;
    let out = PyDict::new(py);
    out.set_item("t", last.time)?;
    out.set_item("mass", last.mass())?;
    out.set_item("alive", last.len())?;
    out.set_item("births", last.births)?;
    out.set_item("deaths", last.deaths)?;
    out.set_item("positions", last.positions())?;
    Ok(out)
}

#[pymodule]
fn ks_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(coulomb, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_rho, m)?)?;
    m.add_function(wrap_pyfunction!(fit_slope, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_check, m)?)?;
    m.add_function(wrap_pyfunction!(solve_pde, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
