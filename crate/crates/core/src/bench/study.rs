use std::path::Path;

use serde::Serialize;

use super::{csv_err, run_solve, RunConfig};
use crate::error::Result;

/// One `(size, layers, cells)` entry of a scaling study, or a fitted slope row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    /// `run` for a measured entry, `slope` for the log–log fit against `n`.
    pub kind: String,
    pub size: usize,
    pub n: usize,
    pub f_hz: f64,
    pub layers: usize,
    pub cells: usize,
    pub iterations: f64,
    pub converged: bool,
    pub per_iteration_s: f64,
    pub online_s: f64,
    pub offline_s: f64,
    pub stored_scalars: f64,
    pub error: String,
}

/// Column order of `study.csv`.
pub const STUDY_COLUMNS: &[&str] = &[
    "kind",
    "size",
    "n",
    "f_hz",
    "layers",
    "cells",
    "iterations",
    "converged",
    "per_iteration_s",
    "online_s",
    "offline_s",
    "stored_scalars",
    "error",
];

/// Least-squares slope of `log y` against `log x`; `NaN` with fewer than two usable points.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// Square grids of each size for every `(layers, cells)` over the template's
/// physical extent. The frequency grows like `sqrt(n)`, anchored at the
/// template's `nx` and `f_hz`, so points per wavelength stay fixed.
/// Failed entries are recorded and the study continues.
pub fn run_scaling_study(template: &RunConfig, sizes: &[usize], p_grid: &[(usize, usize)]) -> Vec<StudyRow> {
    let mut rows = Vec::new();
    for &(layers, cells) in p_grid {
        let mut measured = Vec::new();
        for &size in sizes {
            let f_hz = template.f_hz * size as f64 / template.nx as f64;
            let h = template.h * template.nx as f64 / size as f64;
            let cfg = RunConfig {
                nx: size,
                ny: size,
                h,
                f_hz,
                layers,
                cells,
                npml: None,
                sources: Vec::new(),
                ..template.clone()
            };
            let mut row = StudyRow {
                kind: "run".into(),
                size,
                n: size * size,
                f_hz,
                layers,
                cells,
                iterations: 0.0,
                converged: false,
                per_iteration_s: 0.0,
                online_s: 0.0,
                offline_s: 0.0,
                stored_scalars: 0.0,
                error: String::new(),
            };
            match run_solve(&cfg) {
                Ok(out) => {
                    let r = out.report;
                    row.iterations = r.iterations as f64;
                    row.converged = r.converged;
                    row.per_iteration_s = r.per_iteration_s;
                    row.online_s = r.online_s;
                    row.offline_s = r.factorization_s + r.greens_s;
                    row.stored_scalars = r.stored_scalars as f64;
                    measured.push(row.clone());
                }
                Err(e) => row.error = e.to_string(),
            }
            rows.push(row);
        }
        if measured.len() >= 2 {
            let n: Vec<f64> = measured.iter().map(|r| r.n as f64).collect();
            let col = |f: fn(&StudyRow) -> f64| fit_slope(&n, &measured.iter().map(f).collect::<Vec<_>>());
            rows.push(StudyRow {
                kind: "slope".into(),
                size: 0,
                n: 0,
                f_hz: col(|r| r.f_hz),
                layers,
                cells,
                iterations: col(|r| r.iterations),
                converged: measured.iter().all(|r| r.converged),
                per_iteration_s: col(|r| r.per_iteration_s),
                online_s: col(|r| r.online_s),
                offline_s: col(|r| r.offline_s),
                stored_scalars: col(|r| r.stored_scalars),
                error: String::new(),
            });
        }
    }
    rows
}

/// Writes `study.csv`; an empty study still gets the header.
pub fn write_study(rows: &[StudyRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(STUDY_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.75)).collect();
        assert!((fit_slope(&x, &y) - 0.75).abs() < 1e-12);
        assert!(fit_slope(&[1.0], &[1.0]).is_nan());
    }

    #[test]
    fn empty_study_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.csv");
        let rows = run_scaling_study(&RunConfig::square(32, 10.0, 2, 2), &[], &[(2, 2)]);
        assert!(rows.is_empty());
        write_study(&rows, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{}\n", STUDY_COLUMNS.join(",")));
    }
}
