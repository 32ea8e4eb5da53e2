//! CSV and JSON outputs shared by the command line and the harness.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{KsError, Result};
use crate::grid::GridField;
use crate::harness::RateReport;
use crate::particles::ParticleSnapshot;
use crate::pde::{PdeParams, Trajectory};

impl From<csv::Error> for KsError {
    fn from(e: csv::Error) -> Self {
        KsError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for KsError {
    fn from(e: serde_json::Error) -> Self {
        KsError::Io(e.to_string())
    }
}

/// Shortest round-trip representation.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| KsError::Io(format!("{}: {e}", path.display())))
}

pub const ERRORS_HEADER: [&str; 8] = [
    "N",
    "replica",
    "t",
    "err_l1",
    "err_lr",
    "err_l1lr",
    "kr_mu_vs_u",
    "kr_gap_mollif",
];

pub const RATES_HEADER: [&str; 6] = ["t", "slope", "ci_lo", "ci_hi", "rho_theory", "active_branch"];

/// One row per `(N, replica, t)`, ordered by `N`, then replica, then time.
pub fn write_errors_csv(report: &RateReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(ERRORS_HEADER)?;
    let mut cells: Vec<_> = report.cells.iter().collect();
    cells.sort_by_key(|c| (c.n, c.replica));
    for c in cells {
        for r in &c.records {
            w.write_record([
                c.n.to_string(),
                c.replica.to_string(),
                num(r.t),
                num(r.err_l1),
                num(r.err_lr),
                num(r.err_l1lr),
                num(r.kr_mu_vs_u),
                num(r.kr_gap_mollif),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per checkpoint plus a final `t = sup` row for the sup over
/// checkpoints. Undefined slopes are written as `NaN`.
pub fn write_rates_csv(report: &RateReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(RATES_HEADER)?;
    for row in &report.rates {
        let t = row.t.map_or_else(|| "sup".to_string(), num);
        let (s, lo, hi) = row
            .fit
            .map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.slope, f.ci_lo, f.ci_hi));
        w.write_record([
            t,
            num(s),
            num(lo),
            num(hi),
            num(report.rho.value),
            report.rho.branch.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Field values with `#` header lines carrying `t`, `M`, `L`, `d` and the
/// parameters, then `x_1..x_d,u` rows in grid order.
pub fn write_field_snapshot(path: &Path, t: f64, field: &GridField, params: &PdeParams) -> Result<()> {
    let g = field.grid();
    let d = g.d();
    let mut out = create(path)?;
    writeln!(out, "# t={}", num(t))?;
    writeln!(out, "# M={}", g.side())?;
    writeln!(out, "# L={}", num(g.half_width()))?;
    writeln!(out, "# d={d}")?;
    writeln!(out, "# chi={} nu={} mu={}", num(params.chi), num(params.nu), num(params.mu))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=d).map(|k| format!("x_{k}")).collect();
    header.push("u".into());
    w.write_record(&header)?;
    let mut x = [0.0; 3];
    for (i, &v) in field.values().iter().enumerate() {
        g.position(i, &mut x[..d]);
        let mut rec: Vec<String> = x[..d].iter().map(|&c| num(c)).collect();
        rec.push(num(v));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "l1", "lr", "linf", "kconv_linf", "a_t_running", "file"];

/// Snapshot times and norms; `a_t_running` is the partial `A_T` up to that
/// snapshot. `files` names the snapshot files, if written.
pub fn write_trajectory_manifest(traj: &Trajectory, files: &[String], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(TRAJECTORY_HEADER)?;
    let (mut su, mut sk) = (0.0f64, 0.0f64);
    for (i, s) in traj.snapshots.iter().enumerate() {
        su = su.max(s.norms.linf);
        sk = sk.max(s.norms.kconv_linf);
        w.write_record([
            num(s.t),
            num(s.norms.l1),
            num(s.norms.lr),
            num(s.norms.linf),
            num(s.norms.kconv_linf),
            num(su + sk),
            files.get(i).cloned().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,label,x_1..x_d`, one row per alive particle of each snapshot.
pub fn write_particle_snapshots(snaps: &[ParticleSnapshot], path: &Path) -> Result<()> {
    let d = snaps.first().map_or(2, |s| s.population.d());
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["t".to_string(), "label".to_string()];
    header.extend((1..=d).map(|k| format!("x_{k}")));
    w.write_record(&header)?;
    for s in snaps {
        for p in s.population.particles() {
            let mut rec = vec![num(s.t), p.label.to_string()];
            rec.extend(p.position().iter().map(|&c| num(c)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const POPULATION_HEADER: [&str; 4] = ["t", "m", "births", "deaths"];

/// `t,m,births,deaths` per snapshot, with cumulative counters.
pub fn write_population_summary(snaps: &[ParticleSnapshot], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(POPULATION_HEADER)?;
    for s in snaps {
        let p = &s.population;
        w.write_record([num(s.t), num(p.mass()), p.births.to_string(), p.deaths.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn field_snapshot_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let g = Grid::new(2, 4, 1.0).unwrap();
        let f = g.sample(|x| x[0] + 2.0 * x[1]);
        let p = PdeParams::new(2, 1.0, 0.1, 1.0).unwrap();
        write_field_snapshot(&path, 0.5, &f, &p).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# t=0.5");
        assert_eq!(lines[1], "# M=4");
        assert_eq!(lines[5], "x_1,x_2,u");
        assert_eq!(lines.len(), 6 + 16);
        assert_eq!(lines[6], "-1.0,-1.0,-3.0");
    }
}
