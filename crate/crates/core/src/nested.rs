//! Inner level: a layer split into vertical cells.
//!
//! For every cell the discrete Green's function is sampled on its boundary set:
//! the points of the layer's interface rows that the cell owns, plus the two
//! columns on each side of every inner interface. From these samples come the
//! cell operators `K[out][in]`, with roles `Red` (layer interface rows),
//! `Lead` and `Trail` (inner interfaces). Applying the layer's Green's
//! function then reduces to a block-tridiagonal solve on the inner interfaces.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::assemble::Problem;
use crate::dense::{rel_diff, Mat};
use crate::error::{check_len, Error, Result};
use crate::grid::Patch;
use crate::layered::{split_even, LayerLocal};
use crate::plr::{compress, PlrMatrix, PlrStats};
use crate::sparse::gmres::{GmresOptions, GmresStats};
use crate::sparse::{factorize, Factorization};
use crate::sweep::{self, PolarizedTraceSet, Samples, SubdomainGreens, TraceSet};
use crate::C64;

/// How the inner interface system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InnerStrategy {
    /// Precomputed block LU with compressed blocks.
    #[default]
    CompressedLu,
    /// Preconditioned GMRES with polarized sweeps over the cells.
    NestedPolarized,
}

impl std::str::FromStr for InnerStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compressed-lu" => Ok(InnerStrategy::CompressedLu),
            "nested-polarized" => Ok(InnerStrategy::NestedPolarized),
            _ => Err(Error::Config(format!("unknown inner strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOptions {
    /// PLR tolerance; `None` stores every block dense.
    pub eps: Option<f64>,
    pub max_leaf: usize,
    /// Keep the sampled boundary Green's matrix of each cell.
    pub keep_dense: bool,
    /// Keep each cell's factorization for matrix-free checks.
    pub keep_factor: bool,
    pub strategy: InnerStrategy,
    pub inner_tol: f64,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            eps: Some(1e-8),
            max_leaf: crate::plr::DEFAULT_MAX_LEAF,
            keep_dense: false,
            keep_factor: false,
            strategy: InnerStrategy::CompressedLu,
            inner_tol: 1e-7,
        }
    }
}

/// Interior column ranges `[x0, x1)` of the cells, left to right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellPartition {
    pub cols: Vec<(usize, usize)>,
}

/// Splits `width` interior columns into `lc` cells of at least 4 columns.
pub fn partition_cells(width: usize, lc: usize) -> Result<CellPartition> {
    if lc == 0 || width < 4 * lc {
        return Err(Error::TooManyCells(format!(
            "{lc} cells need at least {} columns, layer has {width}",
            4 * lc.max(1)
        )));
    }
    Ok(CellPartition { cols: split_even(width, lc) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Red,
    Lead,
    Trail,
}

impl Role {
    const ALL: [Role; 3] = [Role::Red, Role::Lead, Role::Trail];

    fn idx(self) -> usize {
        self as usize
    }
}

/// A block that is either kept dense or compressed.
#[derive(Debug, Clone)]
pub enum Block {
    Dense(Mat),
    Plr(PlrMatrix),
}

impl Block {
    fn new(m: Mat, eps: Option<f64>, max_leaf: usize) -> Result<Block> {
        match eps {
            Some(eps) if m.rows() > 0 && m.cols() > 0 => Ok(Block::Plr(compress(&m, eps, max_leaf)?)),
            _ => Ok(Block::Dense(m)),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Block::Dense(m) => m.rows(),
            Block::Plr(p) => p.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Block::Dense(m) => m.cols(),
            Block::Plr(p) => p.cols(),
        }
    }

    pub fn matvec_acc(&self, alpha: C64, v: &[C64], y: &mut [C64]) -> Result<()> {
        match self {
            Block::Dense(m) => {
                check_len(m.cols(), v.len())?;
                check_len(m.rows(), y.len())?;
                m.matvec_acc(alpha, v, y);
                Ok(())
            }
            Block::Plr(p) => p.matvec_acc(alpha, v, y),
        }
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut y = vec![C64::new(0.0, 0.0); self.rows()];
        self.matvec_acc(C64::new(1.0, 0.0), v, &mut y)?;
        Ok(y)
    }

    pub fn to_dense(&self) -> Mat {
        match self {
            Block::Dense(m) => m.clone(),
            Block::Plr(p) => p.to_dense(),
        }
    }

    pub fn stats(&self) -> PlrStats {
        match self {
            Block::Dense(m) => {
                let n = m.rows() * m.cols();
                PlrStats { stored: n, dense: n, ratio: 1.0, max_rank: m.rows().min(m.cols()) }
            }
            Block::Plr(p) => p.stats(),
        }
    }
}

fn add_stats(total: &mut PlrStats, s: PlrStats) {
    total.stored += s.stored;
    total.dense += s.dense;
    total.max_rank = total.max_rank.max(s.max_rank);
    total.ratio = if total.dense == 0 { 0.0 } else { total.stored as f64 / total.dense as f64 };
}

fn empty_stats() -> PlrStats {
    PlrStats { stored: 0, dense: 0, ratio: 0.0, max_rank: 0 }
}

/// Positions of the boundary points of one cell.
#[derive(Debug, Clone)]
struct BoundarySet {
    /// Cell-local extended index of each boundary point.
    points: Vec<usize>,
    red: Vec<usize>,
    lead_p: Vec<usize>,
    lead_q: Vec<usize>,
    trail_p: Vec<usize>,
    trail_q: Vec<usize>,
}

impl BoundarySet {
    fn rows(&self, role: Role) -> Vec<usize> {
        match role {
            Role::Red => self.red.clone(),
            Role::Lead => [self.lead_p.as_slice(), &self.lead_q].concat(),
            Role::Trail => [self.trail_p.as_slice(), &self.trail_q].concat(),
        }
    }
}

/// Precomputed operators of one cell.
#[derive(Debug, Clone)]
pub struct CellGreens {
    pub id: usize,
    pub patch: Patch,
    pub npml: usize,
    pub has_lead: bool,
    pub has_trail: bool,
    /// Own columns, in layer extended coordinates.
    pub own_cols: Range<usize>,
    /// Layer interface rows sampled by this cell.
    pub red_rows: Vec<usize>,
    blocks: [[Option<Block>; 3]; 3],
    boundary: BoundarySet,
    dense_g: Option<Mat>,
    factor: Option<Factorization>,
    lead_coupling: Vec<C64>,
    trail_coupling: Vec<C64>,
}

impl CellGreens {
    pub fn ext_nx(&self) -> usize {
        self.patch.ext_nx(self.npml)
    }

    pub fn ext_ny(&self) -> usize {
        self.patch.ext_ny(self.npml)
    }

    pub fn red_len(&self) -> usize {
        self.red_rows.len() * self.own_cols.len()
    }

    pub fn block(&self, out: Role, inp: Role) -> Option<&Block> {
        self.blocks[out.idx()][inp.idx()].as_ref()
    }

    /// Rows and columns of the sampled boundary Green's matrix for the given roles,
    /// without coupling weights. Requires `keep_dense`.
    pub fn raw_block(&self, out: Role, inp: Role) -> Option<Mat> {
        let g = self.dense_g.as_ref()?;
        Some(g.select_rows(&self.boundary.rows(out)).select_cols(&self.boundary.rows(inp)))
    }

    /// Boundary Green's matrix. Requires `keep_dense`.
    pub fn dense_green(&self) -> Option<&Mat> {
        self.dense_g.as_ref()
    }

    fn inject(&self, rhs: &mut [C64], inp: Role, v: &[C64]) {
        let b = &self.boundary;
        let pts = &b.points;
        match inp {
            Role::Red => {
                for (k, &pos) in b.red.iter().enumerate() {
                    rhs[pts[pos]] += v[k];
                }
            }
            Role::Lead => {
                let n = b.lead_p.len();
                for r in 0..n {
                    let c = self.lead_coupling[r];
                    rhs[pts[b.lead_q[r]]] -= c * v[r];
                    rhs[pts[b.lead_p[r]]] += c * v[n + r];
                }
            }
            Role::Trail => {
                let n = b.trail_p.len();
                for r in 0..n {
                    let c = self.trail_coupling[r];
                    rhs[pts[b.trail_p[r]]] -= c * v[n + r];
                    rhs[pts[b.trail_q[r]]] += c * v[r];
                }
            }
        }
    }

    /// `K[out][in] v` by a local solve. Requires `keep_factor`.
    pub fn apply_matrix_free(&self, out: Role, inp: Role, v: &[C64]) -> Result<Vec<C64>> {
        let factor =
            self.factor.as_ref().ok_or_else(|| Error::InvalidParameter("cell factorization was not kept".into()))?;
        let mut rhs = vec![C64::new(0.0, 0.0); factor.dim()];
        self.inject(&mut rhs, inp, v);
        let u = factor.solve(&rhs)?;
        Ok(self.boundary.rows(out).iter().map(|&pos| u[self.boundary.points[pos]]).collect())
    }

    fn apply_block(&self, out: Role, inp: Role, v: &[C64], y: &mut [C64]) -> Result<()> {
        match self.block(out, inp) {
            Some(b) => b.matvec_acc(C64::new(1.0, 0.0), v, y),
            None => Ok(()),
        }
    }

    /// Replaces dense blocks by compressed ones.
    pub fn compress(&mut self, eps: f64, max_leaf: usize) -> Result<()> {
        for slot in self.blocks.iter_mut().flatten() {
            if let Some(Block::Dense(m)) = slot {
                *slot = Some(Block::new(std::mem::replace(m, Mat::zeros(0, 0)), Some(eps), max_leaf)?);
            }
        }
        Ok(())
    }

    pub fn plr_stats(&self) -> PlrStats {
        let mut total = empty_stats();
        for b in self.blocks.iter().flatten().flatten() {
            add_stats(&mut total, b.stats());
        }
        total
    }
}

/// Samples the boundary Green's function of cell `j` and forms its operators, kept dense.
fn build_cell(
    problem: &Problem,
    layer: &LayerLocal,
    cols: (usize, usize),
    j: usize,
    lc: usize,
    opts: &CellOptions,
) -> Result<CellGreens> {
    let p = layer.npml;
    let patch = Patch { x0: cols.0, x1: cols.1, y0: layer.patch.y0, y1: layer.patch.y1 };
    let a = problem.assemble_patch(&patch);
    let factor = factorize(&a)?;
    let nxc = patch.ext_nx(p);
    let nyc = patch.ext_ny(p);
    let w = patch.width();
    let has_lead = j > 0;
    let has_trail = j + 1 < lc;
    let own_c = (if has_lead { p } else { 0 })..(if has_trail { p + w } else { nxc });
    let [lo, li, ti, to] = layer.lines();
    let mut red_rows = Vec::new();
    if layer.has_lead {
        red_rows.extend([lo, li]);
    }
    if layer.has_trail {
        red_rows.extend([ti, to]);
    }

    let mut pos_of = vec![usize::MAX; nxc * nyc];
    let mut points = Vec::new();
    let mut add = |idx: usize| {
        if pos_of[idx] == usize::MAX {
            pos_of[idx] = points.len();
            points.push(idx);
        }
        pos_of[idx]
    };
    let red: Vec<usize> =
        red_rows.iter().flat_map(|&r| own_c.clone().map(move |c| r * nxc + c)).map(&mut add).collect();
    let column = |c: usize, add: &mut dyn FnMut(usize) -> usize| (0..nyc).map(|r| add(r * nxc + c)).collect::<Vec<_>>();
    let (lead_p, lead_q) = if has_lead { (column(p - 1, &mut add), column(p, &mut add)) } else { (vec![], vec![]) };
    let (trail_p, trail_q) =
        if has_trail { (column(p + w - 1, &mut add), column(p + w, &mut add)) } else { (vec![], vec![]) };
    let boundary = BoundarySet { points, red, lead_p, lead_q, trail_p, trail_q };

    let coupling = |inside: usize, outside: usize| -> Vec<C64> {
        (0..nyc).map(|r| a.get(r * nxc + inside, r * nxc + outside)).collect()
    };
    let lead_coupling = if has_lead { coupling(p, p - 1) } else { vec![] };
    let trail_coupling = if has_trail { coupling(p + w - 1, p + w) } else { vec![] };

    // Boundary Green's matrix, one chunk of unit sources at a time.
    let nb = boundary.points.len();
    let mut g = Mat::zeros(nb, nb);
    const CHUNK: usize = 64;
    for start in (0..nb).step_by(CHUNK) {
        let end = (start + CHUNK).min(nb);
        let mut rhs = Mat::zeros(a.dim(), end - start);
        for (k, &pt) in boundary.points[start..end].iter().enumerate() {
            rhs[(pt, k)] = C64::new(1.0, 0.0);
        }
        let u = factor.solve_many(&rhs)?;
        for k in 0..end - start {
            let col = u.col(k);
            let dst = g.col_mut(start + k);
            for (d, &pt) in dst.iter_mut().zip(&boundary.points) {
                *d = col[pt];
            }
        }
    }

    // Columns of G weighted by each input's injection.
    let inputs: [Option<Mat>; 3] = {
        let weighted = |pos: &[usize], weights: &[C64]| {
            let mut m = g.select_cols(pos);
            for (k, &wt) in weights.iter().enumerate() {
                for z in m.col_mut(k) {
                    *z *= wt;
                }
            }
            m
        };
        let red_in = (!boundary.red.is_empty()).then(|| g.select_cols(&boundary.red));
        let lead_in = has_lead.then(|| {
            let neg: Vec<C64> = lead_coupling.iter().map(|c| -c).collect();
            let pos = [boundary.lead_q.as_slice(), &boundary.lead_p].concat();
            weighted(&pos, &[neg.as_slice(), &lead_coupling].concat())
        });
        let trail_in = has_trail.then(|| {
            let neg: Vec<C64> = trail_coupling.iter().map(|c| -c).collect();
            let pos = [boundary.trail_q.as_slice(), &boundary.trail_p].concat();
            weighted(&pos, &[trail_coupling.as_slice(), &neg].concat())
        });
        [red_in, lead_in, trail_in]
    };
    let mut blocks: [[Option<Block>; 3]; 3] = Default::default();
    for out in Role::ALL {
        let rows = boundary.rows(out);
        if rows.is_empty() {
            continue;
        }
        for inp in Role::ALL {
            if let Some(m) = &inputs[inp.idx()] {
                blocks[out.idx()][inp.idx()] = Some(Block::Dense(m.select_rows(&rows)));
            }
        }
    }
    let own_cols = (own_c.start + cols.0)..(own_c.end + cols.0);
    let cell = CellGreens {
        id: j,
        patch,
        npml: p,
        has_lead,
        has_trail,
        own_cols,
        red_rows,
        blocks,
        boundary,
        dense_g: opts.keep_dense.then_some(g),
        factor: opts.keep_factor.then_some(factor),
        lead_coupling,
        trail_coupling,
    };
    Ok(cell)
}

/// Builds the operators of every cell of a layer.
pub fn build_cell_greens(
    problem: &Problem,
    layer: &LayerLocal,
    lc: usize,
    opts: &CellOptions,
) -> Result<Vec<CellGreens>> {
    let part = partition_cells(problem.grid.nx, lc)?;
    let mut cells = crate::par::try_map(lc, |j| build_cell(problem, layer, part.cols[j], j, lc, opts))?;
    if let Some(eps) = opts.eps {
        for c in &mut cells {
            c.compress(eps, opts.max_leaf)?;
        }
    }
    Ok(cells)
}

/// Block-tridiagonal inner interface matrix, dense.
#[derive(Debug, Clone)]
pub struct InnerSystem {
    pub diag: Vec<Mat>,
    /// `sub[k]` couples `x_{k-1}` into row `k` (`sub[0]` is empty).
    pub sub: Vec<Mat>,
    /// `sup[k]` couples `x_{k+1}` into row `k` (last is empty).
    pub sup: Vec<Mat>,
}

impl InnerSystem {
    pub fn num_interfaces(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &TraceSet) -> Result<TraceSet> {
        let n = self.num_interfaces();
        check_len(n, x.num_interfaces())?;
        let mut out = TraceSet::zeros(n, x.width());
        let one = C64::new(1.0, 0.0);
        for k in 0..n {
            let y = out.trace_mut(k);
            self.diag[k].matvec_acc(one, x.trace(k), y);
            if k > 0 {
                self.sub[k].matvec_acc(one, x.trace(k - 1), y);
            }
            if k + 1 < n {
                self.sup[k].matvec_acc(one, x.trace(k + 1), y);
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Mat {
        let n = self.num_interfaces();
        let t = self.diag.first().map_or(0, |d| d.rows());
        let mut m = Mat::zeros(n * t, n * t);
        for k in 0..n {
            m.set_block(k * t, k * t, &self.diag[k]);
            if k > 0 {
                m.set_block(k * t, (k - 1) * t, &self.sub[k]);
            }
            if k + 1 < n {
                m.set_block(k * t, (k + 1) * t, &self.sup[k]);
            }
        }
        m
    }
}

fn dense_block(cell: &CellGreens, out: Role, inp: Role) -> Result<Mat> {
    cell.block(out, inp)
        .map(Block::to_dense)
        .ok_or_else(|| Error::InconsistentPartition(format!("cell {} has no {out:?}/{inp:?} block", cell.id)))
}

/// Inner interface matrix from the operators of consecutive cells.
pub fn assemble_inner(cells: &[CellGreens]) -> Result<InnerSystem> {
    for pair in cells.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.own_cols.end != b.own_cols.start || a.ext_ny() != b.ext_ny() || !a.has_trail || !b.has_lead {
            return Err(Error::InconsistentPartition(format!("cells {} and {} are not adjacent", a.id, b.id)));
        }
    }
    let n = cells.len().saturating_sub(1);
    let mut diag = Vec::with_capacity(n);
    let mut sub = Vec::with_capacity(n);
    let mut sup = Vec::with_capacity(n);
    for k in 0..n {
        let mut d = Mat::identity(2 * cells[k].ext_ny());
        d.add_scaled(C64::new(-1.0, 0.0), &dense_block(&cells[k], Role::Trail, Role::Trail)?);
        d.add_scaled(C64::new(-1.0, 0.0), &dense_block(&cells[k + 1], Role::Lead, Role::Lead)?);
        diag.push(d);
        sub.push(if k > 0 { dense_block(&cells[k], Role::Trail, Role::Lead)?.scaled_neg() } else { Mat::zeros(0, 0) });
        sup.push(if k + 1 < n {
            dense_block(&cells[k + 1], Role::Lead, Role::Trail)?.scaled_neg()
        } else {
            Mat::zeros(0, 0)
        });
    }
    Ok(InnerSystem { diag, sub, sup })
}

trait Neg {
    fn scaled_neg(&self) -> Mat;
}

impl Neg for Mat {
    fn scaled_neg(&self) -> Mat {
        let mut m = self.clone();
        m.scale(C64::new(-1.0, 0.0));
        m
    }
}

/// Condition limit for the diagonal blocks of the inner LU.
pub const MAX_BLOCK_CONDITION: f64 = 1e12;

/// Block LU factors of the inner interface matrix.
#[derive(Debug, Clone)]
pub struct InnerLu {
    /// Schur complements `U_k`.
    pub u: Vec<Block>,
    pub u_inv: Vec<Block>,
    /// `lower[k] = A_{k,k-1} U_{k-1}⁻¹` (`lower[0]` is empty).
    pub lower: Vec<Block>,
    pub upper: Vec<Block>,
}

fn inverse_checked(m: &Mat, block: usize) -> Result<Mat> {
    let inv = m.inverse().map_err(|_| Error::NearSingularBlock { block, condition: f64::INFINITY })?;
    let condition = m.norm1() * inv.norm1();
    if !condition.is_finite() || condition > MAX_BLOCK_CONDITION {
        return Err(Error::NearSingularBlock { block, condition });
    }
    Ok(inv)
}

/// Block LU without pivoting across blocks.
pub fn block_lu_inner(sys: &InnerSystem, eps: Option<f64>, max_leaf: usize) -> Result<InnerLu> {
    let n = sys.num_interfaces();
    let mut u = Vec::with_capacity(n);
    let mut u_inv = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut prev_inv: Option<Mat> = None;
    for k in 0..n {
        let (uk, lk) = match &prev_inv {
            None => (sys.diag[k].clone(), Mat::zeros(0, 0)),
            Some(pi) => {
                let lk = sys.sub[k].matmul(pi);
                let corr = lk.matmul(&sys.sup[k - 1]);
                (sys.diag[k].sub(&corr), lk)
            }
        };
        let inv = inverse_checked(&uk, k)?;
        u.push(Block::new(uk, eps, max_leaf)?);
        u_inv.push(Block::new(inv.clone(), eps, max_leaf)?);
        lower.push(Block::new(lk, eps, max_leaf)?);
        upper.push(Block::new(sys.sup[k].clone(), eps, max_leaf)?);
        prev_inv = Some(inv);
    }
    Ok(InnerLu { u, u_inv, lower, upper })
}

impl InnerLu {
    pub fn num_interfaces(&self) -> usize {
        self.u.len()
    }

    pub fn solve(&self, b: &TraceSet) -> Result<TraceSet> {
        let n = self.num_interfaces();
        check_len(n, b.num_interfaces())?;
        let one = C64::new(1.0, 0.0);
        let mut y = b.clone();
        for k in 1..n {
            let prev = y.trace(k - 1).to_vec();
            self.lower[k].matvec_acc(-one, &prev, y.trace_mut(k))?;
        }
        let mut x = TraceSet::zeros(n, b.width());
        for k in (0..n).rev() {
            let mut r = y.trace(k).to_vec();
            if k + 1 < n {
                self.upper[k].matvec_acc(-one, x.trace(k + 1), &mut r)?;
            }
            *x.trace_mut(k) = self.u_inv[k].matvec(&r)?;
        }
        Ok(x)
    }

    pub fn plr_stats(&self) -> PlrStats {
        let mut total = empty_stats();
        for b in self.u.iter().chain(&self.u_inv).chain(&self.lower).chain(&self.upper) {
            add_stats(&mut total, b.stats());
        }
        total
    }
}

/// Cells of one layer viewed as a stack of subdomains.
struct CellStack<'a> {
    cells: &'a [CellGreens],
    width: usize,
}

impl SubdomainGreens for CellStack<'_> {
    fn num_subdomains(&self) -> usize {
        self.cells.len()
    }

    fn trace_len(&self) -> usize {
        2 * self.width
    }

    fn apply(&self, l: usize, lead: Option<&[C64]>, trail: Option<&[C64]>) -> Result<Samples> {
        let c = &self.cells[l];
        let mut out = Samples {
            lead: if c.has_lead { vec![C64::new(0.0, 0.0); 2 * self.width] } else { Vec::new() },
            trail: if c.has_trail { vec![C64::new(0.0, 0.0); 2 * self.width] } else { Vec::new() },
        };
        for (role, data) in [(Role::Lead, lead), (Role::Trail, trail)] {
            let Some(v) = data else { continue };
            if c.has_lead {
                c.apply_block(Role::Lead, role, v, &mut out.lead)?;
            }
            if c.has_trail {
                c.apply_block(Role::Trail, role, v, &mut out.trail)?;
            }
        }
        Ok(out)
    }
}

/// Green's operator of a layer assembled from its cells.
#[derive(Debug, Clone)]
pub struct NestedLayer {
    pub cells: Vec<CellGreens>,
    pub inner: Option<InnerLu>,
    pub strategy: InnerStrategy,
    pub inner_tol: f64,
    ext_nx: usize,
    has_lead: bool,
    has_trail: bool,
    coupling: Vec<C64>,
    inner_width: usize,
}

impl NestedLayer {
    pub fn build(problem: &Problem, layer: &LayerLocal, lc: usize, opts: &CellOptions) -> Result<NestedLayer> {
        let part = partition_cells(problem.grid.nx, lc)?;
        let mut cells = crate::par::try_map(lc, |j| build_cell(problem, layer, part.cols[j], j, lc, opts))?;
        let inner = if lc >= 2 && opts.strategy == InnerStrategy::CompressedLu {
            Some(block_lu_inner(&assemble_inner(&cells)?, opts.eps, opts.max_leaf)?)
        } else {
            None
        };
        if let Some(eps) = opts.eps {
            for c in &mut cells {
                c.compress(eps, opts.max_leaf)?;
            }
        }
        Ok(NestedLayer {
            cells,
            inner,
            strategy: opts.strategy,
            inner_tol: opts.inner_tol,
            ext_nx: layer.ext_nx(),
            has_lead: layer.has_lead,
            has_trail: layer.has_trail,
            coupling: layer.coupling().to_vec(),
            inner_width: layer.ext_ny(),
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    fn stack(&self) -> CellStack<'_> {
        CellStack { cells: &self.cells, width: self.inner_width }
    }

    /// Layer interface sources from boundary traces, one vector per red row.
    fn red_sources(&self, lead: Option<&[C64]>, trail: Option<&[C64]>) -> Vec<Vec<C64>> {
        let nx = self.ext_nx;
        let zero = C64::new(0.0, 0.0);
        let mut rows = Vec::new();
        if self.has_lead {
            let (mut lo, mut li) = (vec![zero; nx], vec![zero; nx]);
            if let Some(t) = lead {
                for i in 0..nx {
                    li[i] = -self.coupling[i] * t[i];
                    lo[i] = self.coupling[i] * t[nx + i];
                }
            }
            rows.push(lo);
            rows.push(li);
        }
        if self.has_trail {
            let (mut ti, mut to) = (vec![zero; nx], vec![zero; nx]);
            if let Some(t) = trail {
                for i in 0..nx {
                    ti[i] = -self.coupling[i] * t[nx + i];
                    to[i] = self.coupling[i] * t[i];
                }
            }
            rows.push(ti);
            rows.push(to);
        }
        rows
    }

    /// Inner right-hand side, split into the parts coming from the cells
    /// before and after each inner interface.
    fn inner_rhs(&self, s: &[Vec<C64>]) -> Result<PolarizedTraceSet> {
        let n = self.cells.len() - 1;
        let mut rhs = PolarizedTraceSet::zeros(n, self.inner_width);
        for k in 0..n {
            self.cells[k].apply_block(Role::Trail, Role::Red, &s[k], rhs.down.trace_mut(k))?;
            self.cells[k + 1].apply_block(Role::Lead, Role::Red, &s[k + 1], rhs.up.trace_mut(k))?;
        }
        Ok(rhs)
    }

    /// Solves the inner interface system.
    pub fn inner_solve(&self, rhs: &PolarizedTraceSet) -> Result<(TraceSet, GmresStats)> {
        match (&self.inner, self.strategy) {
            (Some(lu), InnerStrategy::CompressedLu) => {
                let x = lu.solve(&rhs.recombine())?;
                Ok((x, GmresStats { iterations: 0, residuals: vec![0.0], converged: true, true_residual: 0.0 }))
            }
            _ => {
                let opts = GmresOptions { tol: self.inner_tol, maxit: 200, restart: None };
                let (x, stats) = sweep::solve_polarized(&self.stack(), rhs, &opts, None)?;
                Ok((x.recombine(), stats))
            }
        }
    }

    /// Inner interface operator applied to `x`, for checks.
    pub fn apply_inner(&self, x: &TraceSet) -> Result<TraceSet> {
        sweep::apply_jump(&self.stack(), x)
    }

    /// Samples of the layer's Green's representation of the given boundary traces.
    pub fn apply(&self, lead: Option<&[C64]>, trail: Option<&[C64]>) -> Result<Samples> {
        let nx = self.ext_nx;
        for t in [lead, trail].into_iter().flatten() {
            check_len(2 * nx, t.len())?;
        }
        let red = self.red_sources(lead, trail);
        let s: Vec<Vec<C64>> = self
            .cells
            .iter()
            .map(|c| red.iter().flat_map(|row| row[c.own_cols.clone()].iter().copied()).collect())
            .collect();
        let lc = self.cells.len();
        let x = if lc >= 2 {
            let rhs = self.inner_rhs(&s)?;
            let (x, stats) = self.inner_solve(&rhs)?;
            if !stats.converged {
                return Err(Error::Breakdown(stats.iterations));
            }
            Some(x)
        } else {
            None
        };

        let zero = C64::new(0.0, 0.0);
        let mut out_rows = vec![vec![zero; nx]; red.len()];
        for (j, c) in self.cells.iter().enumerate() {
            if c.red_len() == 0 {
                continue;
            }
            let mut r = vec![zero; c.red_len()];
            c.apply_block(Role::Red, Role::Red, &s[j], &mut r)?;
            if let Some(x) = &x {
                if j > 0 {
                    c.apply_block(Role::Red, Role::Lead, x.trace(j - 1), &mut r)?;
                }
                if j + 1 < lc {
                    c.apply_block(Role::Red, Role::Trail, x.trace(j), &mut r)?;
                }
            }
            let w = c.own_cols.len();
            for (row, chunk) in out_rows.iter_mut().zip(r.chunks(w)) {
                row[c.own_cols.clone()].copy_from_slice(chunk);
            }
        }
        let mut it = out_rows.into_iter();
        let mut two = || {
            let a = it.next().expect("red row");
            let b = it.next().expect("red row");
            [a, b].concat()
        };
        let lead_s = if self.has_lead { two() } else { Vec::new() };
        let trail_s = if self.has_trail { two() } else { Vec::new() };
        Ok(Samples { lead: lead_s, trail: trail_s })
    }

    pub fn plr_stats(&self) -> PlrStats {
        let mut total = empty_stats();
        for c in &self.cells {
            add_stats(&mut total, c.plr_stats());
        }
        if let Some(lu) = &self.inner {
            add_stats(&mut total, lu.plr_stats());
        }
        total
    }

    /// Relative difference between this operator and a reference on given data.
    pub fn compare(&self, reference: &Samples, lead: Option<&[C64]>, trail: Option<&[C64]>) -> Result<f64> {
        let s = self.apply(lead, trail)?;
        let a = [s.lead, s.trail].concat();
        let b = [reference.lead.as_slice(), &reference.trail].concat();
        check_len(b.len(), a.len())?;
        Ok(rel_diff(&a, &b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_partition_examples() {
        let sizes: Vec<usize> = partition_cells(18, 4).unwrap().cols.iter().map(|c| c.1 - c.0).collect();
        assert_eq!(sizes, vec![5, 5, 4, 4]);
        assert!(matches!(partition_cells(11, 3), Err(Error::TooManyCells(_))));
        assert!(partition_cells(12, 3).is_ok());
    }

    #[test]
    fn strategy_parses() {
        assert_eq!("nested-polarized".parse::<InnerStrategy>().unwrap(), InnerStrategy::NestedPolarized);
        assert!("lu".parse::<InnerStrategy>().is_err());
    }
}
