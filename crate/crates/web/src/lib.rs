//! Browser bindings: a wavefield solve, iteration snapshots of the sweep
//! preconditioned solve, and the rank map of a compressed Green's block.
//!
//! Each exported function wraps a plain Rust function of the same name with a
//! `_impl` suffix, so the numerics can be tested natively.

use polarized_traces::assemble::ComplexField;
use polarized_traces::bench::{snapshot_iterations, ModelSource, RunConfig};
use polarized_traces::model::ModelSpec;
use polarized_traces::nested::{CellOptions, NestedLayer, Role};
use polarized_traces::plr::{compress, LeafKind};
use wasm_bindgen::prelude::*;

/// Physical extent of the demo domain, in metres.
const EXTENT: f64 = 1280.0;

/// Largest grid the page may request.
pub const MAX_SIZE: usize = 160;

fn model_spec(name: &str) -> Result<ModelSpec, String> {
    Ok(match name {
        "constant" => ModelSpec::Constant { c: 2000.0 },
        "gradient" => ModelSpec::VerticalGradient { c_top: 1500.0, c_bottom: 3000.0 },
        "lens" => ModelSpec::Lens { c_background: 2500.0, c_lens: 1600.0, radius: 0.2 },
        "rough" => ModelSpec::RoughLayered { seed: 7, c_min: 1500.0, c_max: 4500.0 },
        _ => return Err(format!("unknown model {name:?}")),
    })
}

fn config(
    size: usize,
    f_hz: f64,
    model: &str,
    layers: usize,
    cells: usize,
    src: (f64, f64),
) -> Result<RunConfig, String> {
    if !(16..=MAX_SIZE).contains(&size) {
        return Err(format!("size must lie in 16..={MAX_SIZE}"));
    }
    let clamp = |t: f64| ((t.clamp(0.0, 1.0)) * (size - 1) as f64).round() as usize;
    let mut cfg = RunConfig::square(size, f_hz, layers, cells);
    cfg.h = EXTENT / size as f64;
    cfg.model = ModelSource::Synthetic(model_spec(model)?);
    cfg.sources = vec![[clamp(src.0), clamp(src.1)]];
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Diverging blue–white–red colours of `Re(u)`, scaled by the peak magnitude.
pub fn colorize(u: &ComplexField) -> Vec<u8> {
    let vals = u.interior();
    let peak = vals.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(vals.len() * 4);
    for z in vals {
        let t = if peak > 0.0 { z.re / peak } else { 0.0 };
        let fade = |a: f64| (255.0 * (1.0 - a.abs())).round() as u8;
        let (r, g, b) = if t >= 0.0 { (255, fade(t), fade(t)) } else { (fade(t), fade(t), 255) };
        out.extend_from_slice(&[r, g, b, 255]);
    }
    out
}

#[wasm_bindgen]
pub struct Wavefield {
    size: usize,
    rgba: Vec<u8>,
    iterations: usize,
    residual: f64,
}

#[wasm_bindgen]
impl Wavefield {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }
}

pub fn solve_wavefield_impl(
    size: usize,
    f_hz: f64,
    model: &str,
    layers: usize,
    cells: usize,
    src_x: f64,
    src_y: f64,
) -> Result<Wavefield, String> {
    let cfg = config(size, f_hz, model, layers, cells, (src_x, src_y))?;
    let out = polarized_traces::bench::run_solve(&cfg).map_err(|e| e.to_string())?;
    Ok(Wavefield {
        size,
        rgba: colorize(&out.field),
        iterations: out.report.iterations,
        residual: out.report.volume_residual,
    })
}

/// Solves with a point source at fractional position `(src_x, src_y)`.
#[wasm_bindgen]
pub fn solve_wavefield(
    size: usize,
    f_hz: f64,
    model: &str,
    layers: usize,
    cells: usize,
    src_x: f64,
    src_y: f64,
) -> Result<Wavefield, JsError> {
    solve_wavefield_impl(size, f_hz, model, layers, cells, src_x, src_y).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct Snapshots {
    size: usize,
    frames: Vec<Vec<u8>>,
    distances: Vec<f64>,
}

#[wasm_bindgen]
impl Snapshots {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn count(&self) -> usize {
        self.frames.len()
    }

    pub fn rgba(&self, k: usize) -> Vec<u8> {
        self.frames.get(k).cloned().unwrap_or_default()
    }

    /// Relative distance of frame `k` to the converged field.
    pub fn distance(&self, k: usize) -> f64 {
        self.distances.get(k).copied().unwrap_or(f64::NAN)
    }
}

pub fn sweep_snapshots_impl(
    size: usize,
    f_hz: f64,
    model: &str,
    layers: usize,
    src_x: f64,
    src_y: f64,
) -> Result<Snapshots, String> {
    let mut cfg = config(size, f_hz, model, layers, 0, (src_x, src_y))?;
    cfg.tol = 1e-8;
    let fields = snapshot_iterations(&cfg).map_err(|e| e.to_string())?;
    let last = fields.last().ok_or("no snapshots")?.clone();
    Ok(Snapshots {
        size,
        frames: fields.iter().map(colorize).collect(),
        distances: fields.iter().map(|u| u.rel_diff(&last)).collect(),
    })
}

/// Volume fields after each outer iteration, starting from local solves only.
#[wasm_bindgen]
pub fn sweep_snapshots(
    size: usize,
    f_hz: f64,
    model: &str,
    layers: usize,
    src_x: f64,
    src_y: f64,
) -> Result<Snapshots, JsError> {
    sweep_snapshots_impl(size, f_hz, model, layers, src_x, src_y).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct RankMap {
    dim: usize,
    leaves: Vec<u32>,
    ratio: f64,
    max_rank: usize,
}

#[wasm_bindgen]
impl RankMap {
    /// Side length of the compressed block.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Leaves as `(row, col, rows, cols, rank)` quintuples; dense leaves carry
    /// rank `min(rows, cols)` and zero leaves rank 0.
    pub fn leaves(&self) -> Vec<u32> {
        self.leaves.clone()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn max_rank(&self) -> usize {
        self.max_rank
    }
}

pub fn rank_map_impl(size: usize, f_hz: f64, model: &str, eps: f64) -> Result<RankMap, String> {
    let cfg = config(size, f_hz, model, 2, 1, (0.5, 0.5))?;
    let err = |e: polarized_traces::Error| e.to_string();
    let problem = cfg.problem().map_err(err)?;
    let partition = polarized_traces::layered::partition_layers(&problem.grid, 2).map_err(err)?;
    let layer = polarized_traces::layered::build_layer(&problem, &partition, 0).map_err(err)?;
    let opts = CellOptions { eps: None, ..Default::default() };
    let nested = NestedLayer::build(&problem, &layer, 1, &opts).map_err(err)?;
    let block = nested.cells[0].block(Role::Red, Role::Red).ok_or("layer has no interface")?.to_dense();
    let plr = compress(&block, eps, 32).map_err(err)?;
    let mut leaves = Vec::new();
    for leaf in plr.leaves() {
        let rank = match leaf.kind {
            LeafKind::Zero => 0,
            LeafKind::Dense => leaf.rows.min(leaf.cols),
            LeafKind::LowRank(r) => r,
        };
        leaves.extend([leaf.row, leaf.col, leaf.rows, leaf.cols, rank].map(|v| v as u32));
    }
    let stats = plr.stats();
    Ok(RankMap { dim: block.rows(), leaves, ratio: stats.ratio, max_rank: stats.max_rank })
}

/// Partitioned low-rank layout of the interface-to-interface Green's block of the top layer.
#[wasm_bindgen]
pub fn rank_map(size: usize, f_hz: f64, model: &str, eps: f64) -> Result<RankMap, JsError> {
    rank_map_impl(size, f_hz, model, eps).map_err(|e| JsError::new(&e))
}
