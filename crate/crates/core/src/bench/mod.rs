//! Run configuration, solve orchestration, reports and field snapshots.
//!
//! A run is described by a TOML file:
//!
//! ```toml
//! nx = 128
//! ny = 128
//! h = 10.0
//! f_hz = 12.0
//! layers = 4
//! cells = 2                 # 0 applies layer Green's functions by direct solves
//! strategy = "compressed-lu" # or "nested-polarized"
//! tol = 1e-5
//! sources = [[64, 20]]
//!
//! [model]
//! kind = "rough-layered"
//! seed = 7
//! ```
//!
//! `[model]` may instead hold `file = "path.helm-m"`.

mod study;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::assemble::{ComplexField, Problem};
use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::grid::{Grid, PmlProfile};
use crate::io::{dump_field, load_model};
use crate::layered::{OuterSolver, SolverOptions};
use crate::model::{synthetic_model, ModelSpec, SlownessModel};
use crate::nested::InnerStrategy;
use crate::sweep::{PolarizedTraceSet, TraceSet};
use crate::C64;

pub use study::{fit_slope, run_scaling_study, write_study, StudyRow, STUDY_COLUMNS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    File { file: PathBuf },
    Synthetic(ModelSpec),
}

fn default_cells() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-5
}
fn default_inner_eps() -> f64 {
    1e-8
}
fn default_maxit() -> usize {
    50
}
fn default_repetitions() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub f_hz: f64,
    pub model: ModelSource,
    pub layers: usize,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub strategy: InnerStrategy,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// PLR tolerance of the inner structures; 0 keeps them dense.
    #[serde(default = "default_inner_eps")]
    pub inner_eps: f64,
    /// Inner GMRES tolerance; defaults to `tol / 100`.
    #[serde(default)]
    pub inner_tol: Option<f64>,
    /// Absorbing collar width; defaults to `max(8, round(log2(nx * ny)))`.
    #[serde(default)]
    pub npml: Option<usize>,
    /// Point sources `[ix, iy]`; defaults to the centre.
    #[serde(default)]
    pub sources: Vec<[usize; 2]>,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
    /// Replaces the seed of a rough-layered model.
    #[serde(default)]
    pub seed: Option<u64>,
    /// PML peak absorption as a multiple of `c_max / (npml h)`.
    #[serde(default)]
    pub pml_strength: Option<f64>,
    /// Online repetitions; the median time is reported.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
}

/// Collar width used when the config does not set one.
pub fn default_npml(nx: usize, ny: usize) -> usize {
    ((nx * ny) as f64).log2().round().max(8.0) as usize
}

impl RunConfig {
    /// A homogeneous square run, handy as a study template.
    pub fn square(n: usize, f_hz: f64, layers: usize, cells: usize) -> RunConfig {
        RunConfig {
            nx: n,
            ny: n,
            h: 10.0,
            f_hz,
            model: ModelSource::Synthetic(ModelSpec::Constant { c: 2000.0 }),
            layers,
            cells,
            strategy: InnerStrategy::CompressedLu,
            tol: default_tol(),
            inner_eps: default_inner_eps(),
            inner_tol: None,
            npml: None,
            sources: Vec::new(),
            maxit: default_maxit(),
            seed: None,
            pml_strength: None,
            repetitions: 1,
        }
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.nx < 4 || self.ny < 4 {
            return bad(format!("grid {}x{} is too small", self.nx, self.ny));
        }
        if !(self.h > 0.0 && self.h.is_finite()) || !(self.f_hz > 0.0 && self.f_hz.is_finite()) {
            return bad("h and f_hz must be positive".into());
        }
        if self.layers == 0 {
            return bad("layers must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol = {} must lie in (0, 1)", self.tol));
        }
        if !(self.inner_eps >= 0.0 && self.inner_eps < 1.0) {
            return bad(format!("inner_eps = {} must lie in [0, 1)", self.inner_eps));
        }
        if let Some(t) = self.inner_tol {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("inner_tol = {t} must lie in (0, 1)"));
            }
        }
        if self.maxit == 0 || self.repetitions == 0 {
            return bad("maxit and repetitions must be positive".into());
        }
        if matches!(self.pml_strength, Some(k) if !(k > 0.0 && k.is_finite())) {
            return bad("pml_strength must be positive".into());
        }
        if matches!(self.npml, Some(p) if p < 2) {
            return bad("npml must be at least 2".into());
        }
        for s in &self.sources {
            if s[0] >= self.nx || s[1] >= self.ny {
                return bad(format!("source {s:?} outside the {}x{} grid", self.nx, self.ny));
            }
        }
        if let ModelSource::File { file } = &self.model {
            if !file.is_file() {
                return bad(format!("model file {} not found", file.display()));
            }
        }
        Ok(())
    }

    pub fn npml(&self) -> usize {
        self.npml.unwrap_or_else(|| default_npml(self.nx, self.ny))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.h, self.npml()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model(&self, grid: &Grid) -> Result<SlownessModel> {
        match &self.model {
            ModelSource::File { file } => load_model(file, grid).map_err(|e| Error::Config(e.to_string())),
            ModelSource::Synthetic(spec) => {
                let spec = match (spec, self.seed) {
                    (ModelSpec::RoughLayered { c_min, c_max, .. }, Some(seed)) => {
                        ModelSpec::RoughLayered { seed, c_min: *c_min, c_max: *c_max }
                    }
                    _ => spec.clone(),
                };
                synthetic_model(&spec, grid).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let grid = self.grid()?;
        let model = self.model(&grid)?;
        match self.pml_strength {
            None => Problem::new(grid, model, self.f_hz),
            Some(k) => {
                let profile = PmlProfile::with_strength(k, grid.npml, grid.h, model.max_velocity());
                Problem::with_omega(grid, model, std::f64::consts::PI * self.f_hz, Some(profile))
            }
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = match self.cells {
            0 => SolverOptions::layered(self.layers),
            c => SolverOptions::nested(self.layers, c, self.strategy),
        };
        o.inner_eps = (self.inner_eps > 0.0).then_some(self.inner_eps);
        o.inner_tol = self.inner_tol.unwrap_or(self.tol * 1e-2);
        o.maxit = self.maxit;
        o
    }

    pub fn source(&self, grid: &Grid) -> ComplexField {
        let mut f = ComplexField::zeros(grid);
        let centre = [[self.nx / 2, self.ny / 2]];
        let pts: &[[usize; 2]] = if self.sources.is_empty() { &centre } else { &self.sources };
        let scale = 1.0 / (self.h * self.h);
        for &[ix, iy] in pts {
            f.values[grid.interior_index(ix, iy)] += C64::new(scale, 0.0);
        }
        f
    }

    /// Warning text when the grid resolves fewer than 8 of `c_min / (f h)`.
    pub fn resolution_warning(&self, model: &SlownessModel) -> Option<String> {
        let ratio = model.min_velocity() / (self.f_hz * self.h);
        (ratio < 8.0).then(|| format!("c_min/(f h) = {ratio:.2} is below 8; the wavefield is under-resolved"))
    }
}

/// Numbers from one run. Times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub nx: usize,
    pub ny: usize,
    pub npml: usize,
    pub layers: usize,
    pub cells: usize,
    pub strategy: String,
    pub f_hz: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gmres_residual: f64,
    pub true_residual: f64,
    pub volume_residual: f64,
    pub factorization_s: f64,
    pub greens_s: f64,
    pub local_solves_s: f64,
    pub sweeps_s: f64,
    pub recombination_s: f64,
    pub online_s: f64,
    /// Sweep time divided by the iteration count.
    pub per_iteration_s: f64,
    pub total_s: f64,
    pub stored_scalars: usize,
    pub dense_scalars: usize,
    pub compression_ratio: f64,
    pub max_rank: usize,
    /// Relative residuals after each iteration, `;`-separated.
    pub residual_history: String,
}

/// Column order of `report.csv`.
pub const REPORT_COLUMNS: &[&str] = &[
    "nx",
    "ny",
    "npml",
    "layers",
    "cells",
    "strategy",
    "f_hz",
    "converged",
    "iterations",
    "gmres_residual",
    "true_residual",
    "volume_residual",
    "factorization_s",
    "greens_s",
    "local_solves_s",
    "sweeps_s",
    "recombination_s",
    "online_s",
    "per_iteration_s",
    "total_s",
    "stored_scalars",
    "dense_scalars",
    "compression_ratio",
    "max_rank",
    "residual_history",
];

impl RunReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.serialize(self).map_err(csv_err)?;
        w.flush()?;
        Ok(())
    }

    /// Copy with every wall time zeroed, for comparing runs.
    pub fn without_times(&self) -> RunReport {
        RunReport {
            factorization_s: 0.0,
            greens_s: 0.0,
            local_solves_s: 0.0,
            sweeps_s: 0.0,
            recombination_s: 0.0,
            online_s: 0.0,
            per_iteration_s: 0.0,
            total_s: 0.0,
            ..self.clone()
        }
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// Result of [`run_solve`].
pub struct RunOutput {
    pub report: RunReport,
    pub field: ComplexField,
}

/// Offline stage, then the online stage repeated `config.repetitions` times.
pub fn run_solve(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let start = Stopwatch::start();
    let problem = config.problem()?;
    let solver = OuterSolver::build(&problem, &config.solver_options())?;
    let f = config.source(&problem.grid);

    let mut runs = Vec::with_capacity(config.repetitions);
    for _ in 0..config.repetitions {
        runs.push(solver.solve_with(&f, config.tol, None)?);
    }
    let online: Vec<Duration> =
        runs.iter().map(|r| r.times.local_solves + r.times.sweeps + r.times.recombination).collect();
    let mid = {
        let m = median(online.clone());
        online.iter().position(|&t| t == m).unwrap_or(0)
    };
    let out = runs.swap_remove(mid);

    let a = problem.assemble_patch(&problem.grid.full_patch());
    let volume_residual = a.relative_residual(&out.field.values, &f.values)?;
    let stats = &out.stats;
    let plr = solver.plr_stats();
    let online_s = online[mid].as_secs_f64();
    let report = RunReport {
        nx: config.nx,
        ny: config.ny,
        npml: problem.grid.npml,
        layers: config.layers,
        cells: config.cells,
        strategy: if config.cells == 0 { "direct".into() } else { strategy_name(config.strategy).into() },
        f_hz: config.f_hz,
        converged: stats.converged,
        iterations: stats.iterations,
        gmres_residual: *stats.residuals.last().unwrap_or(&0.0),
        true_residual: stats.true_residual,
        volume_residual,
        factorization_s: solver.offline.factorizations.as_secs_f64(),
        greens_s: solver.offline.greens.as_secs_f64(),
        local_solves_s: out.times.local_solves.as_secs_f64(),
        sweeps_s: out.times.sweeps.as_secs_f64(),
        recombination_s: out.times.recombination.as_secs_f64(),
        online_s,
        per_iteration_s: out.times.sweeps.as_secs_f64() / stats.iterations.max(1) as f64,
        total_s: start.elapsed().as_secs_f64(),
        stored_scalars: plr.map_or(0, |s| s.stored),
        dense_scalars: plr.map_or(0, |s| s.dense),
        compression_ratio: plr.map_or(0.0, |s| s.ratio),
        max_rank: plr.map_or(0, |s| s.max_rank),
        residual_history: stats.residuals.iter().map(|r| format!("{r:e}")).collect::<Vec<_>>().join(";"),
    };
    Ok(RunOutput { report, field: out.field })
}

pub fn strategy_name(s: InnerStrategy) -> &'static str {
    match s {
        InnerStrategy::CompressedLu => "compressed-lu",
        InnerStrategy::NestedPolarized => "nested-polarized",
    }
}

/// Writes `report.csv` and `field.{helm-u,pgm}` into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    out.report.write_csv(&dir.join("report.csv"))?;
    dump_field(&out.field, dir, "field")
}

/// Volume fields after 0, 1, 2, … outer iterations, then the converged field.
pub fn snapshot_iterations(config: &RunConfig) -> Result<Vec<ComplexField>> {
    config.validate()?;
    let problem = config.problem()?;
    let solver = OuterSolver::build(&problem, &config.solver_options())?;
    let f = config.source(&problem.grid);
    let k = solver.num_interfaces();
    let width = solver.width();

    let mut iterates: Vec<PolarizedTraceSet> = Vec::new();
    let mut record = |_: usize, p: &PolarizedTraceSet| iterates.push(p.clone());
    let out = solver.solve_with(&f, config.tol, Some(&mut record))?;

    let mut fields = vec![solver.reconstruct_volume(&TraceSet::zeros(k, width), &f)?];
    for p in &iterates {
        fields.push(solver.reconstruct_volume(&p.recombine(), &f)?);
    }
    fields.push(out.field);
    Ok(fields)
}

/// Dumps snapshots as `snapshot_000`, `snapshot_001`, … and `snapshot_final`.
pub fn write_snapshots(fields: &[ComplexField], dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::with_capacity(fields.len());
    for (k, u) in fields.iter().enumerate() {
        let stem = if k + 1 == fields.len() { "snapshot_final".to_string() } else { format!("snapshot_{k:03}") };
        dump_field(u, dir, &stem)?;
        stems.push(stem);
    }
    Ok(stems)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        nx = 32
        ny = 32
        h = 10.0
        f_hz = 10.0
        layers = 2
        cells = 2
        [model]
        kind = "constant"
        c = 2000.0
    "#;

    #[test]
    fn parses_defaults() {
        let c = RunConfig::from_toml(BASIC).unwrap();
        assert_eq!(c.npml(), 10);
        assert_eq!(c.tol, 1e-5);
        assert_eq!(c.repetitions, 3);
        assert!((c.solver_options().inner_tol - 1e-7).abs() < 1e-20);
        assert_eq!(c.model, ModelSource::Synthetic(ModelSpec::Constant { c: 2000.0 }));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(RunConfig::from_toml("nx = 3"), Err(Error::Config(_))));
        let missing = BASIC.replace("kind = \"constant\"\n        c = 2000.0", "file = \"/nonexistent.helm-m\"");
        assert!(matches!(RunConfig::from_toml(&missing), Err(Error::Config(_))));
        let unknown = format!("bogus = 1\n{BASIC}");
        assert!(matches!(RunConfig::from_toml(&unknown), Err(Error::Config(_))));
        let outside = format!("sources = [[40, 1]]\n{BASIC}");
        assert!(matches!(RunConfig::from_toml(&outside), Err(Error::Config(_))));
    }

    #[test]
    fn npml_policy() {
        assert_eq!(default_npml(16, 16), 8);
        assert_eq!(default_npml(512, 512), 18);
    }

    #[test]
    fn report_header_matches_columns() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::from_toml(BASIC).unwrap();
        cfg.repetitions = 1;
        let out = run_solve(&cfg).unwrap();
        let path = dir.path().join("report.csv");
        out.report.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().next().unwrap(), REPORT_COLUMNS.join(","));
    }
}
