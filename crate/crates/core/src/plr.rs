//! Partitioned low-rank compression of dense complex blocks.
//!
//! A block is split dyadically until each piece is either stored as a rank-`r`
//! product `U V` that strictly saves storage and meets the relative accuracy
//! `||B - U V||_F ≤ eps ||B||_F`, or is small enough to keep dense. Small
//! blocks are rank-revealed by a full SVD, larger ones by an adaptive
//! randomized range finder with one power iteration.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{gemm, Mat, ONE, ZERO};
use crate::error::{check_len, Error, Result};
use crate::C64;

pub const DEFAULT_MAX_LEAF: usize = 32;
/// Blocks with both sides up to this size use a full SVD.
pub const SVD_LIMIT: usize = 256;
const OVERSAMPLE: usize = 8;
const BASE_SEED: u64 = 0x5eed_b10c;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Zero,
    Dense(Mat),
    LowRank { u: Mat, v: Mat },
    Split { row_mid: usize, col_mid: usize, children: Vec<Node> },
}

/// Compressed matrix; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PlrMatrix {
    rows: usize,
    cols: usize,
    eps: f64,
    root: Node,
}

/// Storage accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlrStats {
    pub stored: usize,
    pub dense: usize,
    pub ratio: f64,
    pub max_rank: usize,
}

/// Kind of a leaf in the block partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    Zero,
    Dense,
    LowRank(usize),
}

/// Leaf of the partition: position, size and storage kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Leaf {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
    pub kind: LeafKind,
}

/// Compresses `a` to relative accuracy `eps` with leaves no smaller than `max_leaf`.
pub fn compress(a: &Mat, eps: f64, max_leaf: usize) -> Result<PlrMatrix> {
    if !(eps > 1e-14 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("compression tolerance {eps} outside (1e-14, 1)")));
    }
    if max_leaf < 8 {
        return Err(Error::InvalidParameter(format!("max_leaf = {max_leaf} < 8")));
    }
    let root = compress_node(a, 0, 0, a.rows(), a.cols(), eps, max_leaf);
    Ok(PlrMatrix { rows: a.rows(), cols: a.cols(), eps, root })
}

fn compress_node(a: &Mat, r0: usize, c0: usize, m: usize, n: usize, eps: f64, max_leaf: usize) -> Node {
    let block = a.block(r0..r0 + m, c0..c0 + n);
    let norm = block.fro_norm();
    if norm == 0.0 {
        return Node::Zero;
    }
    let small = m <= max_leaf && n <= max_leaf;
    if small {
        return Node::Dense(block);
    }
    let tol = eps * norm;
    let revealed = if m.min(n) <= SVD_LIMIT || m.max(n) <= SVD_LIMIT {
        svd_low_rank(&block, tol)
    } else {
        randomized_low_rank(&block, tol, block_seed(r0, c0, m, n))
    };
    if let Some((u, v)) = revealed {
        return Node::LowRank { u, v };
    }
    let row_mid = if m > max_leaf { m / 2 } else { m };
    let col_mid = if n > max_leaf { n / 2 } else { n };
    let quads = [
        (0, 0, row_mid, col_mid),
        (row_mid, 0, m - row_mid, col_mid),
        (0, col_mid, row_mid, n - col_mid),
        (row_mid, col_mid, m - row_mid, n - col_mid),
    ];
    let children = crate::par::map(4, |q| {
        let (dr, dc, mm, nn) = quads[q];
        if mm == 0 || nn == 0 {
            Node::Zero
        } else {
            compress_node(a, r0 + dr, c0 + dc, mm, nn, eps, max_leaf)
        }
    });
    Node::Split { row_mid, col_mid, children }
}

fn block_seed(r0: usize, c0: usize, m: usize, n: usize) -> u64 {
    let mut z = BASE_SEED ^ ((r0 as u64) << 40) ^ ((c0 as u64) << 20) ^ ((m as u64) << 8) ^ n as u64;
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn saves_storage(r: usize, m: usize, n: usize) -> bool {
    r * (m + n) < m * n
}

/// Smallest rank whose discarded tail (plus `base²`) stays within `tol`.
fn truncation_rank(sigma: &[f64], base_sq: f64, tol: f64) -> Option<usize> {
    let tol_sq = tol * tol;
    if base_sq > tol_sq {
        return None;
    }
    // Suffix sums, accumulated from the small end to avoid cancellation.
    let mut tail = base_sq;
    let mut r = sigma.len();
    for (k, s) in sigma.iter().enumerate().rev() {
        tail += s * s;
        if tail > tol_sq {
            break;
        }
        r = k;
    }
    Some(r)
}

fn svd_low_rank(b: &Mat, tol: f64) -> Option<(Mat, Mat)> {
    let (m, n) = (b.rows(), b.cols());
    let svd = b.to_nalgebra().svd(true, true);
    let u = svd.u.as_ref()?;
    let vt = svd.v_t.as_ref()?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let r = truncation_rank(&sigma, 0.0, tol)?;
    if !saves_storage(r, m, n) {
        return None;
    }
    let uf = Mat::from_fn(m, r, |i, k| u[(i, order[k])] * sigma[k]);
    let vf = Mat::from_fn(r, n, |k, j| vt[(order[k], j)]);
    Some((uf, vf))
}

fn orthonormalize(y: &Mat) -> Mat {
    let q = y.to_nalgebra().qr().q();
    Mat::from_nalgebra(&q)
}

fn randomized_low_rank(b: &Mat, tol: f64, seed: u64) -> Option<(Mat, Mat)> {
    let (m, n) = (b.rows(), b.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = 32usize;
    loop {
        let l = (k + OVERSAMPLE).min(m.min(n));
        let omega = Mat::from_fn(n, l, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        });
        let mut y = Mat::zeros(m, l);
        gemm(ONE, b, false, &omega, false, ZERO, &mut y);
        // one power iteration
        let q = orthonormalize(&y);
        let mut z = Mat::zeros(n, l);
        gemm(ONE, b, true, &q, false, ZERO, &mut z);
        let qz = orthonormalize(&z);
        gemm(ONE, b, false, &qz, false, ZERO, &mut y);
        let q = orthonormalize(&y);

        let mut c = Mat::zeros(l, n);
        gemm(ONE, &q, true, b, false, ZERO, &mut c);
        let mut resid = b.clone();
        gemm(-ONE, &q, false, &c, false, ONE, &mut resid);
        let base = resid.fro_norm();

        let svd = DMatrix::from_column_slice(l, n, c.as_slice()).svd(true, true);
        let (w, vt) = (svd.u.as_ref()?, svd.v_t.as_ref()?);
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

        if let Some(r) = truncation_rank(&sigma, base * base, tol) {
            if !saves_storage(r, m, n) {
                return None;
            }
            let wr = Mat::from_fn(l, r, |i, kk| w[(i, order[kk])] * sigma[kk]);
            let u = q.matmul(&wr);
            let v = Mat::from_fn(r, n, |kk, j| vt[(order[kk], j)]);
            return Some((u, v));
        }
        // Grow the sketch only while the spectrum is clearly decaying.
        let decaying = sigma.len() >= 2 && sigma[sigma.len() - 1] < 0.1 * sigma[sigma.len() / 2];
        let next = 2 * k;
        if !decaying || l >= m.min(n) || !saves_storage(next, m, n) {
            return None;
        }
        k = next;
    }
}

impl PlrMatrix {
    /// Uncompressed storage as a single dense leaf.
    pub fn from_dense(a: Mat) -> PlrMatrix {
        let (rows, cols) = (a.rows(), a.cols());
        let root = if a.as_slice().iter().all(|z| *z == ZERO) { Node::Zero } else { Node::Dense(a) };
        PlrMatrix { rows, cols, eps: 0.0, root }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Tolerance used at construction; 0 for uncompressed matrices.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut y = vec![ZERO; self.rows];
        self.matvec_acc(ONE, v, &mut y)?;
        Ok(y)
    }

    /// `y += alpha * M v`.
    pub fn matvec_acc(&self, alpha: C64, v: &[C64], y: &mut [C64]) -> Result<()> {
        check_len(self.cols, v.len())?;
        check_len(self.rows, y.len())?;
        apply(&self.root, alpha, v, y);
        Ok(())
    }

    pub fn to_dense(&self) -> Mat {
        let mut out = Mat::zeros(self.rows, self.cols);
        for leaf in self.leaves_with_data() {
            if let Some(b) = leaf.1 {
                out.set_block(leaf.0.row, leaf.0.col, &b);
            }
        }
        out
    }

    pub fn leaves(&self) -> Vec<Leaf> {
        self.leaves_with_data().into_iter().map(|(l, _)| l).collect()
    }

    fn leaves_with_data(&self) -> Vec<(Leaf, Option<Mat>)> {
        let mut out = Vec::new();
        collect(&self.root, 0, 0, self.rows, self.cols, &mut out);
        out
    }

    pub fn stats(&self) -> PlrStats {
        let mut stored = 0;
        let mut max_rank = 0;
        for l in self.leaves() {
            match l.kind {
                LeafKind::Zero => {}
                LeafKind::Dense => stored += l.rows * l.cols,
                LeafKind::LowRank(r) => {
                    stored += r * (l.rows + l.cols);
                    max_rank = max_rank.max(r);
                }
            }
        }
        let dense = self.rows * self.cols;
        let ratio = if dense == 0 { 0.0 } else { stored as f64 / dense as f64 };
        PlrStats { stored, dense, ratio, max_rank }
    }
}

fn apply(node: &Node, alpha: C64, v: &[C64], y: &mut [C64]) {
    match node {
        Node::Zero => {}
        Node::Dense(b) => b.matvec_acc(alpha, v, y),
        Node::LowRank { u, v: vf } => {
            let t = vf.matvec(v);
            u.matvec_acc(alpha, &t, y);
        }
        Node::Split { row_mid, col_mid, children } => {
            let (v0, v1) = v.split_at(*col_mid);
            let (y0, y1) = y.split_at_mut(*row_mid);
            apply(&children[0], alpha, v0, y0);
            apply(&children[1], alpha, v0, y1);
            apply(&children[2], alpha, v1, y0);
            apply(&children[3], alpha, v1, y1);
        }
    }
}

fn collect(node: &Node, r0: usize, c0: usize, m: usize, n: usize, out: &mut Vec<(Leaf, Option<Mat>)>) {
    let leaf = |kind| Leaf { row: r0, col: c0, rows: m, cols: n, kind };
    match node {
        Node::Zero => {
            if m > 0 && n > 0 {
                out.push((leaf(LeafKind::Zero), None))
            }
        }
        Node::Dense(b) => out.push((leaf(LeafKind::Dense), Some(b.clone()))),
        Node::LowRank { u, v } => out.push((leaf(LeafKind::LowRank(u.cols())), Some(u.matmul(v)))),
        Node::Split { row_mid, col_mid, children } => {
            let (rm, cm) = (*row_mid, *col_mid);
            collect(&children[0], r0, c0, rm, cm, out);
            collect(&children[1], r0 + rm, c0, m - rm, cm, out);
            collect(&children[2], r0, c0 + cm, rm, n - cm, out);
            collect(&children[3], r0 + rm, c0 + cm, m - rm, n - cm, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(n: usize) -> Mat {
        Mat::from_fn(n, n, |i, j| C64::new(1.0 / (1.0 + (i as f64 - j as f64).abs()), 0.0))
    }

    #[test]
    fn zero_matrix_is_one_empty_leaf() {
        let m = compress(&Mat::zeros(64, 64), 1e-6, 32).unwrap();
        let st = m.stats();
        assert_eq!(m.leaves().len(), 1);
        assert_eq!(st.stored, 0);
        assert_eq!(st.max_rank, 0);
    }

    #[test]
    fn outer_product_is_rank_one() {
        let a = Mat::from_fn(128, 128, |i, j| C64::new((i as f64).cos(), 1.0) * C64::new(1.0, (j as f64).sin()));
        let m = compress(&a, 1e-10, 32).unwrap();
        let st = m.stats();
        assert_eq!(st.max_rank, 1);
        assert!(st.stored <= 4 * 256);
    }

    #[test]
    fn kernel_accuracy_and_partition() {
        let a = kernel(256);
        let m = compress(&a, 1e-6, 32).unwrap();
        assert!(m.to_dense().sub(&a).fro_norm() <= 1e-6 * a.fro_norm());
        let area: usize = m.leaves().iter().map(|l| l.rows * l.cols).sum();
        assert_eq!(area, 256 * 256);
        assert!(m.stats().ratio < 0.5);
    }

    #[test]
    fn randomized_path_is_accurate() {
        let a = kernel(600);
        let m = compress(&a, 1e-8, 32).unwrap();
        assert!(m.to_dense().sub(&a).fro_norm() <= 1e-8 * a.fro_norm());
        assert!(m.stats().ratio < 0.5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(compress(&Mat::identity(4), 0.0, 32).is_err());
        assert!(compress(&Mat::identity(4), 1e-6, 4).is_err());
    }

    #[test]
    fn truncation_rank_rule() {
        assert_eq!(truncation_rank(&[3.0, 1.0, 0.1], 0.0, 0.2), Some(2));
        assert_eq!(truncation_rank(&[3.0, 1.0, 0.1], 0.0, 10.0), Some(0));
        assert_eq!(truncation_rank(&[3.0], 1.0, 0.5), None);
    }
}
