//! Outer level: horizontal layers coupled through two-row interface traces.
//!
//! Each layer is the patch of its interior rows with its own absorbing collar
//! on every side. The layer's Green's representation injects equivalent
//! sources on the two rows adjacent to each interface, using the stencil's
//! vertical coupling coefficients, and samples the same rows.

use std::ops::Range;
use std::time::Duration;

use crate::assemble::{ComplexField, Problem};
use crate::clock::Stopwatch;
use crate::dense::Mat;
use crate::error::{check_len, Error, Result};
use crate::grid::{Grid, Patch};
use crate::nested::{CellOptions, InnerStrategy, NestedLayer};
use crate::plr::PlrStats;
use crate::sparse::gmres::{GmresOptions, GmresStats};
use crate::sparse::{factorize, Factorization, SparseMatrix};
use crate::sweep::{self, Input, PolarizedTraceSet, Samples, SubdomainGreens, TraceMonitor, TraceSet};
use crate::C64;

/// Near-equal split of `n` items into `parts` contiguous ranges, larger ranges first.
pub(crate) fn split_even(n: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = n / parts;
    let extra = n % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        out.push((start, start + len));
        start += len;
    }
    out
}

/// Interior row ranges `[y0, y1)` of the layers, top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPartition {
    pub rows: Vec<(usize, usize)>,
}

impl LayerPartition {
    pub fn num_layers(&self) -> usize {
        self.rows.len()
    }

    pub fn num_interfaces(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }
}

/// Splits the interior rows into `l` layers of at least 4 rows each.
pub fn partition_layers(grid: &Grid, l: usize) -> Result<LayerPartition> {
    if l == 0 || grid.ny < 4 * l {
        return Err(Error::TooManyLayers(format!(
            "{l} layers need at least {} rows, grid has {}",
            4 * l.max(1),
            grid.ny
        )));
    }
    Ok(LayerPartition { rows: split_even(grid.ny, l) })
}

/// A factorized layer problem.
#[derive(Debug, Clone)]
pub struct LayerLocal {
    pub id: usize,
    pub patch: Patch,
    pub npml: usize,
    pub has_lead: bool,
    pub has_trail: bool,
    matrix: SparseMatrix,
    factor: Factorization,
    coupling: Vec<C64>,
}

/// Assembles and factorizes layer `l`.
pub fn build_layer(problem: &Problem, partition: &LayerPartition, l: usize) -> Result<LayerLocal> {
    let &(y0, y1) = partition.rows.get(l).ok_or_else(|| Error::InvalidParameter(format!("layer {l} out of range")))?;
    let grid = &problem.grid;
    let patch = Patch { x0: 0, x1: grid.nx, y0, y1 };
    let matrix = problem.assemble_patch(&patch);
    let factor = factorize(&matrix)?;
    let p = grid.npml;
    let nx = patch.ext_nx(p);
    let coupling = (0..nx).map(|i| matrix.get(p * nx + i, (p - 1) * nx + i)).collect();
    Ok(LayerLocal {
        id: l,
        patch,
        npml: p,
        has_lead: l > 0,
        has_trail: l + 1 < partition.num_layers(),
        matrix,
        factor,
        coupling,
    })
}

impl LayerLocal {
    pub fn ext_nx(&self) -> usize {
        self.patch.ext_nx(self.npml)
    }

    pub fn ext_ny(&self) -> usize {
        self.patch.ext_ny(self.npml)
    }

    pub fn len(&self) -> usize {
        self.ext_nx() * self.ext_ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factor
    }

    /// Vertical coupling coefficient at each extended column.
    pub fn coupling(&self) -> &[C64] {
        &self.coupling
    }

    /// Local extended rows of the four trace lines: lead outside, lead inside,
    /// trail inside, trail outside.
    pub fn lines(&self) -> [usize; 4] {
        let p = self.npml;
        let h = self.patch.height();
        [p - 1, p, p + h - 1, p + h]
    }

    /// Local extended rows owned by this layer (the outer collar belongs to the first and last layer).
    pub fn own_rows(&self) -> Range<usize> {
        let p = self.npml;
        let start = if self.has_lead { p } else { 0 };
        let end = if self.has_trail { p + self.patch.height() } else { self.ext_ny() };
        start..end
    }

    /// Offset from local to global extended row.
    pub fn row_offset(&self) -> usize {
        self.patch.y0
    }

    /// Adds the equivalent sources of the given boundary traces to `rhs`.
    pub fn inject(&self, rhs: &mut [C64], lead: Option<&[C64]>, trail: Option<&[C64]>) {
        let nx = self.ext_nx();
        let [lo, li, ti, to] = self.lines();
        if let (true, Some(t)) = (self.has_lead, lead) {
            let (pl, ql) = t.split_at(nx);
            for i in 0..nx {
                let c = self.coupling[i];
                rhs[li * nx + i] -= c * pl[i];
                rhs[lo * nx + i] += c * ql[i];
            }
        }
        if let (true, Some(t)) = (self.has_trail, trail) {
            let (pt, qt) = t.split_at(nx);
            for i in 0..nx {
                let c = self.coupling[i];
                rhs[ti * nx + i] -= c * qt[i];
                rhs[to * nx + i] += c * pt[i];
            }
        }
    }

    /// Two-line samples of a local field at the lead and trail interfaces.
    pub fn sample(&self, u: &[C64]) -> Samples {
        let nx = self.ext_nx();
        let [lo, li, ti, to] = self.lines();
        let two = |a: usize, b: usize| [&u[a * nx..(a + 1) * nx], &u[b * nx..(b + 1) * nx]].concat();
        Samples {
            lead: if self.has_lead { two(lo, li) } else { Vec::new() },
            trail: if self.has_trail { two(ti, to) } else { Vec::new() },
        }
    }

    /// Restriction of a global field to the layer's own rows (zero elsewhere).
    pub fn restrict(&self, f: &ComplexField) -> Vec<C64> {
        let nx = self.ext_nx();
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        for r in self.own_rows() {
            let g = (r + self.row_offset()) * nx;
            out[r * nx..(r + 1) * nx].copy_from_slice(&f.values[g..g + nx]);
        }
        out
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        self.factor.solve(rhs)
    }

    /// Green's representation with sources `f` (already restricted) plus boundary traces.
    pub fn represent(&self, f: Option<&[C64]>, lead: Option<&[C64]>, trail: Option<&[C64]>) -> Result<Vec<C64>> {
        let mut rhs = match f {
            Some(f) => {
                check_len(self.len(), f.len())?;
                f.to_vec()
            }
            None => vec![C64::new(0.0, 0.0); self.len()],
        };
        self.inject(&mut rhs, lead, trail);
        self.solve(&rhs)
    }
}

/// How the solver is decomposed.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub layers: usize,
    /// Cells per layer; `None` applies layer Green's functions by direct solves.
    pub cells: Option<usize>,
    pub strategy: InnerStrategy,
    /// PLR tolerance for cell and inner-LU blocks; `None` keeps them dense.
    pub inner_eps: Option<f64>,
    pub max_leaf: usize,
    pub inner_tol: f64,
    pub maxit: usize,
    pub restart: Option<usize>,
}

impl SolverOptions {
    /// Layers only, with direct layer solves.
    pub fn layered(layers: usize) -> Self {
        SolverOptions {
            layers,
            cells: None,
            strategy: InnerStrategy::CompressedLu,
            inner_eps: Some(1e-8),
            max_leaf: crate::plr::DEFAULT_MAX_LEAF,
            inner_tol: 1e-7,
            maxit: 50,
            restart: None,
        }
    }

    /// Layers split into cells.
    pub fn nested(layers: usize, cells: usize, strategy: InnerStrategy) -> Self {
        SolverOptions { cells: Some(cells), strategy, ..Self::layered(layers) }
    }

    pub fn cell_options(&self) -> CellOptions {
        CellOptions {
            eps: self.inner_eps,
            max_leaf: self.max_leaf,
            keep_dense: false,
            keep_factor: false,
            strategy: self.strategy,
            inner_tol: self.inner_tol,
        }
    }
}

/// Wall times of the offline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OfflineTimes {
    pub factorizations: Duration,
    pub greens: Duration,
}

/// Wall times of one online solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OnlineTimes {
    pub local_solves: Duration,
    pub sweeps: Duration,
    pub recombination: Duration,
}

/// Everything produced by one solve.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub field: ComplexField,
    pub traces: PolarizedTraceSet,
    pub stats: GmresStats,
    pub times: OnlineTimes,
}

/// The offline stage of the layered (optionally nested) solver.
pub struct OuterSolver {
    pub problem: Problem,
    pub partition: LayerPartition,
    pub options: SolverOptions,
    pub layers: Vec<LayerLocal>,
    pub nested: Option<Vec<NestedLayer>>,
    pub offline: OfflineTimes,
}

impl OuterSolver {
    pub fn build(problem: &Problem, options: &SolverOptions) -> Result<OuterSolver> {
        Self::build_with(problem, options, &options.cell_options())
    }

    pub fn build_with(problem: &Problem, options: &SolverOptions, cell_opts: &CellOptions) -> Result<OuterSolver> {
        if problem.grid.npml < 2 {
            return Err(Error::InvalidParameter("the layered solver needs an absorbing collar".into()));
        }
        let partition = partition_layers(&problem.grid, options.layers)?;
        let t = Stopwatch::start();
        let layers = crate::par::try_map(partition.num_layers(), |l| build_layer(problem, &partition, l))?;
        let factorizations = t.elapsed();
        let t = Stopwatch::start();
        let nested = match options.cells {
            None => None,
            Some(lc) => {
                Some(crate::par::try_map(layers.len(), |l| NestedLayer::build(problem, &layers[l], lc, cell_opts))?)
            }
        };
        let greens = t.elapsed();
        Ok(OuterSolver {
            problem: problem.clone(),
            partition,
            options: options.clone(),
            layers,
            nested,
            offline: OfflineTimes { factorizations, greens },
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.problem.grid
    }

    /// Points per trace line.
    pub fn width(&self) -> usize {
        self.grid().ext_nx()
    }

    pub fn num_interfaces(&self) -> usize {
        self.partition.num_interfaces()
    }

    fn check_field(&self, f: &ComplexField) -> Result<()> {
        if f.grid != *self.grid() {
            return Err(Error::DimensionMismatch { expected: self.grid().n_total(), found: f.grid.n_total() });
        }
        check_len(self.grid().n_total(), f.values.len())
    }

    /// Local solves of the sources, sampled at the interfaces: the down-going
    /// part comes from the layer above each interface, the up-going part from
    /// the layer below.
    pub fn local_rhs_polarized(&self, f: &ComplexField) -> Result<PolarizedTraceSet> {
        self.check_field(f)?;
        let samples = crate::par::try_map(self.layers.len(), |l| {
            let layer = &self.layers[l];
            let u = layer.solve(&layer.restrict(f))?;
            Ok(layer.sample(&u))
        })?;
        let k = self.num_interfaces();
        let w = self.width();
        let down = (0..k).map(|i| samples[i].trail.clone()).collect();
        let up = (0..k).map(|i| samples[i + 1].lead.clone()).collect();
        Ok(PolarizedTraceSet { down: TraceSet::from_traces(w, down)?, up: TraceSet::from_traces(w, up)? })
    }

    /// Right-hand side of the interface system.
    pub fn local_rhs(&self, f: &ComplexField) -> Result<TraceSet> {
        Ok(self.local_rhs_polarized(f)?.recombine())
    }

    pub fn apply_m(&self, t: &TraceSet) -> Result<TraceSet> {
        sweep::apply_jump(self, t)
    }

    pub fn apply_m_polarized(&self, p: &PolarizedTraceSet) -> Result<PolarizedTraceSet> {
        sweep::apply_polarized(self, p)
    }

    pub fn gauss_seidel_precond(&self, v: &PolarizedTraceSet) -> Result<PolarizedTraceSet> {
        sweep::gauss_seidel(self, v)
    }

    /// Volume field from interface traces: one local solve per layer, own rows kept.
    pub fn reconstruct_volume(&self, t: &TraceSet, f: &ComplexField) -> Result<ComplexField> {
        self.check_field(f)?;
        check_len(self.num_interfaces(), t.num_interfaces())?;
        let parts = crate::par::try_map(self.layers.len(), |l| {
            let layer = &self.layers[l];
            let lead = (l > 0).then(|| t.trace(l - 1));
            let trail = (l < t.num_interfaces()).then(|| t.trace(l));
            layer.represent(Some(&layer.restrict(f)), lead, trail)
        })?;
        let mut out = ComplexField::zeros(self.grid());
        let nx = self.width();
        for (layer, u) in self.layers.iter().zip(&parts) {
            for r in layer.own_rows() {
                let g = (r + layer.row_offset()) * nx;
                out.values[g..g + nx].copy_from_slice(&u[r * nx..(r + 1) * nx]);
            }
        }
        Ok(out)
    }

    pub fn solve(&self, f: &ComplexField, tol: f64) -> Result<(ComplexField, GmresStats)> {
        let out = self.solve_with(f, tol, None)?;
        Ok((out.field, out.stats))
    }

    /// Full online stage; `monitor` sees the polarized iterate after each GMRES iteration.
    pub fn solve_with(&self, f: &ComplexField, tol: f64, monitor: Option<TraceMonitor>) -> Result<SolveOutput> {
        let t = Stopwatch::start();
        let rhs = self.local_rhs_polarized(f)?;
        let mut times = OnlineTimes { local_solves: t.elapsed(), ..Default::default() };

        let t = Stopwatch::start();
        let opts = GmresOptions { tol, maxit: self.options.maxit, restart: self.options.restart };
        let (traces, stats) = if self.num_interfaces() == 0 {
            let stats = GmresStats { iterations: 0, residuals: vec![0.0], converged: true, true_residual: 0.0 };
            (rhs.clone(), stats)
        } else {
            sweep::solve_polarized(self, &rhs, &opts, monitor)?
        };
        times.sweeps = t.elapsed();

        let t = Stopwatch::start();
        let u = traces.recombine();
        let field = self.reconstruct_volume(&u, f)?;
        times.recombination = t.elapsed();
        Ok(SolveOutput { field, traces, stats, times })
    }

    /// Storage of the compressed inner structures, summed over layers.
    pub fn plr_stats(&self) -> Option<PlrStats> {
        let nested = self.nested.as_ref()?;
        let mut total = PlrStats { stored: 0, dense: 0, ratio: 0.0, max_rank: 0 };
        for n in nested {
            let s = n.plr_stats();
            total.stored += s.stored;
            total.dense += s.dense;
            total.max_rank = total.max_rank.max(s.max_rank);
        }
        total.ratio = if total.dense == 0 { 0.0 } else { total.stored as f64 / total.dense as f64 };
        Some(total)
    }

    /// Green's application of layer `l` by a direct local solve, bypassing any cells.
    pub fn apply_direct(&self, l: usize, lead: Option<&[C64]>, trail: Option<&[C64]>) -> Result<Samples> {
        let layer = &self.layers[l];
        Ok(layer.sample(&layer.represent(None, lead, trail)?))
    }
}

impl SubdomainGreens for OuterSolver {
    fn num_subdomains(&self) -> usize {
        self.layers.len()
    }

    fn trace_len(&self) -> usize {
        2 * self.width()
    }

    fn apply(&self, l: usize, lead: Option<&[C64]>, trail: Option<&[C64]>) -> Result<Samples> {
        match &self.nested {
            Some(n) => n[l].apply(lead, trail),
            None => self.apply_direct(l, lead, trail),
        }
    }

    fn apply_batch(&self, l: usize, inputs: &[Input]) -> Result<Vec<Samples>> {
        if let Some(n) = &self.nested {
            return inputs.iter().map(|(a, b)| n[l].apply(*a, *b)).collect();
        }
        let layer = &self.layers[l];
        let len = layer.len();
        let mut rhs = Mat::zeros(len, inputs.len());
        for (j, (a, b)) in inputs.iter().enumerate() {
            layer.inject(rhs.col_mut(j), *a, *b);
        }
        let u = layer.factorization().solve_many(&rhs)?;
        Ok((0..inputs.len()).map(|j| layer.sample(u.col(j))).collect())
    }
}

/// Direct sparse solve of the global problem.
pub fn direct_solve(problem: &Problem, f: &ComplexField) -> Result<ComplexField> {
    let a = problem.assemble_patch(&problem.grid.full_patch());
    let x = factorize(&a)?.solve(&f.values)?;
    ComplexField::from_values(&problem.grid, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_examples() {
        let g = |ny| Grid::new(8, ny, 1.0, 2).unwrap();
        assert_eq!(partition_layers(&g(16), 4).unwrap().rows, vec![(0, 4), (4, 8), (8, 12), (12, 16)]);
        let rows = partition_layers(&g(17), 4).unwrap().rows;
        let sizes: Vec<usize> = rows.iter().map(|r| r.1 - r.0).collect();
        assert_eq!(sizes, vec![5, 4, 4, 4]);
        assert!(matches!(partition_layers(&g(12), 4), Err(Error::TooManyLayers(_))));
    }

    #[test]
    fn split_covers_range() {
        for n in 4..40 {
            for parts in 1..=n / 4 {
                let s = split_even(n, parts);
                assert_eq!(s[0].0, 0);
                assert_eq!(s.last().unwrap().1, n);
                assert!(s.windows(2).all(|w| w[0].1 == w[1].0));
                let max = s.iter().map(|r| r.1 - r.0).max().unwrap();
                let min = s.iter().map(|r| r.1 - r.0).min().unwrap();
                assert!(max - min <= 1);
            }
        }
    }
}
