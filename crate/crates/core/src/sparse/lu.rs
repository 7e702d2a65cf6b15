//! Multifrontal LU factorization on a nested-dissection tree.
//!
//! The symbolic structure uses the pattern of `A + Aᵀ`; values stay
//! unsymmetric. Pivoting is static: each front is eliminated in order and a
//! pivot that is tiny relative to its original row aborts the factorization.

use super::ordering::{nested_dissection, NdTree};
use super::SparseMatrix;
use crate::dense::{gemm_raw, Mat, ONE, ZERO};
use crate::error::{check_len, Error, Result};
use crate::C64;

const LEAF_SIZE: usize = 64;
const BLOCK: usize = 32;
const PIVOT_TOL: f64 = 1e-14;

/// Immutable LU factors of a sparse matrix.
#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    fronts: Vec<Front>,
}

#[derive(Debug, Clone)]
struct Front {
    vars: Vec<usize>,
    update: Vec<usize>,
    /// First `ns` columns of the factored front, `(ns + nu) × ns`: unit-lower
    /// `L11` below the diagonal, `U11` on and above it, `L21` underneath.
    panel: Vec<C64>,
    /// `U12`, `ns × nu`.
    u12: Vec<C64>,
}

impl Front {
    fn ns(&self) -> usize {
        self.vars.len()
    }
    fn nf(&self) -> usize {
        self.vars.len() + self.update.len()
    }
}

struct Symbolic<'a> {
    a: &'a SparseMatrix,
    at: SparseMatrix,
    tree: NdTree,
    pos: Vec<usize>,
    first_pos: Vec<usize>,
    update: Vec<Vec<usize>>,
    row_max: Vec<f64>,
}

/// Factorizes a square sparse matrix with a fill-reducing nested-dissection ordering.
pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    let n = a.dim();
    let at = a.transpose();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        let (cols, _) = a.row(i);
        for &j in cols {
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let tree = nested_dissection(&adj, LEAF_SIZE);

    let mut pos = vec![0; n];
    let mut first_pos = Vec::with_capacity(tree.nodes.len());
    let mut k = 0;
    for nd in &tree.nodes {
        first_pos.push(k);
        for &v in &nd.vertices {
            pos[v] = k;
            k += 1;
        }
    }

    // Update sets, children first.
    let mut update: Vec<Vec<usize>> = Vec::with_capacity(tree.nodes.len());
    let mut mark = vec![usize::MAX; n];
    for (id, nd) in tree.nodes.iter().enumerate() {
        let last = first_pos[id] + nd.vertices.len();
        let mut u = Vec::new();
        let mut push = |w: usize, u: &mut Vec<usize>| {
            if pos[w] >= last && mark[w] != id {
                mark[w] = id;
                u.push(w);
            }
        };
        for &v in &nd.vertices {
            for &w in &adj[v] {
                push(w, &mut u);
            }
        }
        for &c in &nd.children {
            for &w in &update[c] {
                push(w, &mut u);
            }
        }
        u.sort_unstable_by_key(|&w| pos[w]);
        update.push(u);
    }

    let row_max = (0..n).map(|i| a.row(i).1.iter().map(|z| z.norm()).fold(0.0, f64::max)).collect();

    let sym = Symbolic { a, at, tree, pos, first_pos, update, row_max };
    let mut slots: Vec<Option<Front>> = (0..sym.tree.nodes.len()).map(|_| None).collect();
    let mut outputs = Vec::new();
    for &r in &sym.tree.roots {
        outputs.push(factor_subtree(&sym, r)?);
    }
    for out in outputs {
        for (id, f) in out.fronts {
            slots[id] = Some(f);
        }
    }
    let fronts = slots.into_iter().map(|f| f.expect("every node factored")).collect();
    Ok(Factorization { n, fronts })
}

struct SubtreeOut {
    fronts: Vec<(usize, Front)>,
    contribution: Vec<C64>,
}

fn factor_subtree(sym: &Symbolic, id: usize) -> Result<SubtreeOut> {
    let children = &sym.tree.nodes[id].children;
    let child_out = factor_children(sym, children)?;

    let vars = &sym.tree.nodes[id].vertices;
    let update = &sym.update[id];
    let ns = vars.len();
    let nf = ns + update.len();
    let p0 = sym.first_pos[id];
    let update_pos: Vec<usize> = update.iter().map(|&w| sym.pos[w]).collect();
    let local = |w: usize| -> Option<usize> {
        let p = sym.pos[w];
        if p < p0 {
            None
        } else if p < p0 + ns {
            Some(p - p0)
        } else {
            update_pos.binary_search(&p).ok().map(|k| ns + k)
        }
    };

    let mut f = vec![ZERO; nf * nf];
    for (a_loc, &v) in vars.iter().enumerate() {
        let (cols, vals) = sym.a.row(v);
        for (&w, &val) in cols.iter().zip(vals) {
            if let Some(b) = local(w) {
                f[b * nf + a_loc] += val;
            }
        }
        let (rows, vals) = sym.at.row(v);
        for (&w, &val) in rows.iter().zip(vals) {
            if sym.pos[w] >= p0 + ns {
                if let Some(b) = local(w) {
                    f[a_loc * nf + b] += val;
                }
            }
        }
    }

    let mut fronts = Vec::new();
    for (out, &c) in child_out.into_iter().zip(children) {
        let cu = &sym.update[c];
        let map: Vec<usize> = cu.iter().map(|&w| local(w).expect("child update inside parent front")).collect();
        let m = cu.len();
        for (jc, &jf) in map.iter().enumerate() {
            let col = &out.contribution[jc * m..(jc + 1) * m];
            let dst = jf * nf;
            for (ic, &ifr) in map.iter().enumerate() {
                f[dst + ifr] += col[ic];
            }
        }
        fronts.extend(out.fronts);
    }

    partial_lu(&mut f, nf, ns, |j| {
        let v = vars[j];
        (p0 + j, sym.row_max[v])
    })?;

    let nu = nf - ns;
    let mut u12 = vec![ZERO; ns * nu];
    let mut contribution = vec![ZERO; nu * nu];
    for j in 0..nu {
        u12[j * ns..(j + 1) * ns].copy_from_slice(&f[(ns + j) * nf..(ns + j) * nf + ns]);
        contribution[j * nu..(j + 1) * nu].copy_from_slice(&f[(ns + j) * nf + ns..(ns + j + 1) * nf]);
    }
    f.truncate(nf * ns);
    f.shrink_to_fit();
    fronts.push((id, Front { vars: vars.clone(), update: update.clone(), panel: f, u12 }));
    Ok(SubtreeOut { fronts, contribution })
}

fn factor_children(sym: &Symbolic, children: &[usize]) -> Result<Vec<SubtreeOut>> {
    match children.len() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![factor_subtree(sym, children[0])?]),
        _ => {
            let mid = children.len() / 2;
            let (a, b) =
                crate::par::join(|| factor_children(sym, &children[..mid]), || factor_children(sym, &children[mid..]));
            let mut a = a?;
            a.extend(b?);
            Ok(a)
        }
    }
}

/// Eliminates the first `ns` columns of the `nf × nf` column-major front in place.
fn partial_lu<F: Fn(usize) -> (usize, f64)>(f: &mut [C64], nf: usize, ns: usize, pivot_info: F) -> Result<()> {
    let mut k0 = 0;
    while k0 < ns {
        let b = BLOCK.min(ns - k0);
        let k1 = k0 + b;
        for j in k0..k1 {
            let piv = f[j * nf + j];
            let mag = piv.norm();
            let (step, row_max) = pivot_info(j);
            if mag == 0.0 || !mag.is_finite() || mag < PIVOT_TOL * row_max {
                return Err(Error::SingularPivot { step, magnitude: mag });
            }
            let inv = ONE / piv;
            for x in &mut f[j * nf + j + 1..(j + 1) * nf] {
                *x *= inv;
            }
            for jj in j + 1..k1 {
                let s = f[jj * nf + j];
                if s == ZERO {
                    continue;
                }
                let (left, right) = f.split_at_mut(jj * nf);
                let lcol = &left[j * nf + j + 1..(j + 1) * nf];
                for (x, l) in right[j + 1..nf].iter_mut().zip(lcol) {
                    *x -= s * l;
                }
            }
        }
        for jj in k1..nf {
            for j in k0..k1 {
                let x = f[jj * nf + j];
                if x == ZERO {
                    continue;
                }
                for i in j + 1..k1 {
                    let l = f[j * nf + i];
                    f[jj * nf + i] -= l * x;
                }
            }
        }
        let m = nf - k1;
        if m > 0 {
            let base = f.as_mut_ptr();
            // SAFETY: the three regions (rows ≥ k1 × cols k0..k1, rows k0..k1 × cols ≥ k1,
            // rows ≥ k1 × cols ≥ k1) are disjoint parts of the same nf × nf buffer.
            unsafe {
                gemm_raw(
                    m,
                    b,
                    m,
                    -ONE,
                    base.add(k0 * nf + k1),
                    1,
                    nf as isize,
                    base.add(k1 * nf + k0),
                    1,
                    nf as isize,
                    ONE,
                    base.add(k1 * nf + k1),
                    1,
                    nf as isize,
                );
            }
        }
        k0 = k1;
    }
    Ok(())
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn factor_entries(&self) -> usize {
        self.fronts.iter().map(|f| f.panel.len() + f.u12.len()).sum()
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n, b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x, 1);
        Ok(x)
    }

    /// Solves for every column of `b`.
    pub fn solve_many(&self, b: &Mat) -> Result<Mat> {
        check_len(self.n, b.rows())?;
        let k = b.cols();
        let mut x = b.clone().into_vec();
        self.solve_in_place(&mut x, k);
        Mat::from_col_major(self.n, k, x)
    }

    /// In-place solve of `k` column-major right-hand sides of length `n`.
    pub fn solve_in_place(&self, x: &mut [C64], k: usize) {
        assert_eq!(x.len(), self.n * k);
        if k == 0 {
            return;
        }
        let n = self.n;
        let mut y = Vec::new();
        let mut t = Vec::new();
        for fr in &self.fronts {
            let (ns, nf) = (fr.ns(), fr.nf());
            let nu = nf - ns;
            gather(x, n, k, &fr.vars, &mut y);
            trsm_lower_unit(ns, k, &fr.panel, nf, &mut y);
            if nu > 0 {
                t.clear();
                t.resize(nu * k, ZERO);
                // SAFETY: L21 is the (nu × ns) block at row offset ns of the panel.
                unsafe {
                    gemm_raw(
                        nu,
                        ns,
                        k,
                        ONE,
                        fr.panel.as_ptr().add(ns),
                        1,
                        nf as isize,
                        y.as_ptr(),
                        1,
                        ns as isize,
                        ZERO,
                        t.as_mut_ptr(),
                        1,
                        nu as isize,
                    );
                }
                for c in 0..k {
                    for (r, &w) in fr.update.iter().enumerate() {
                        x[c * n + w] -= t[c * nu + r];
                    }
                }
            }
            scatter(x, n, k, &fr.vars, &y);
        }
        for fr in self.fronts.iter().rev() {
            let (ns, nf) = (fr.ns(), fr.nf());
            let nu = nf - ns;
            gather(x, n, k, &fr.vars, &mut y);
            if nu > 0 {
                gather(x, n, k, &fr.update, &mut t);
                // SAFETY: u12 is ns × nu, t is nu × k, y is ns × k.
                unsafe {
                    gemm_raw(
                        ns,
                        nu,
                        k,
                        -ONE,
                        fr.u12.as_ptr(),
                        1,
                        ns as isize,
                        t.as_ptr(),
                        1,
                        nu as isize,
                        ONE,
                        y.as_mut_ptr(),
                        1,
                        ns as isize,
                    );
                }
            }
            trsm_upper(ns, k, &fr.panel, nf, &mut y);
            scatter(x, n, k, &fr.vars, &y);
        }
    }
}

fn gather(x: &[C64], n: usize, k: usize, idx: &[usize], out: &mut Vec<C64>) {
    out.clear();
    for c in 0..k {
        out.extend(idx.iter().map(|&v| x[c * n + v]));
    }
}

fn scatter(x: &mut [C64], n: usize, k: usize, idx: &[usize], y: &[C64]) {
    let m = idx.len();
    for c in 0..k {
        for (r, &v) in idx.iter().enumerate() {
            x[c * n + v] = y[c * m + r];
        }
    }
}

/// Solves `L Y = Y` for unit-lower `L` (leading `m × m` of `l`, leading dim `ld`).
fn trsm_lower_unit(m: usize, k: usize, l: &[C64], ld: usize, y: &mut [C64]) {
    let mut i0 = 0;
    while i0 < m {
        let i1 = (i0 + BLOCK).min(m);
        for c in 0..k {
            let col = &mut y[c * m..(c + 1) * m];
            for j in i0..i1 {
                let x = col[j];
                if x == ZERO {
                    continue;
                }
                for i in j + 1..i1 {
                    col[i] -= l[j * ld + i] * x;
                }
            }
        }
        if i1 < m {
            let base = y.as_mut_ptr();
            // SAFETY: rows i0..i1 and i1..m of y are disjoint.
            unsafe {
                gemm_raw(
                    m - i1,
                    i1 - i0,
                    k,
                    -ONE,
                    l.as_ptr().add(i0 * ld + i1),
                    1,
                    ld as isize,
                    base.add(i0),
                    1,
                    m as isize,
                    ONE,
                    base.add(i1),
                    1,
                    m as isize,
                );
            }
        }
        i0 = i1;
    }
}

/// Solves `U Y = Y` for upper-triangular `U` (leading `m × m` of `u`, leading dim `ld`).
fn trsm_upper(m: usize, k: usize, u: &[C64], ld: usize, y: &mut [C64]) {
    let mut i1 = m;
    while i1 > 0 {
        let i0 = i1.saturating_sub(BLOCK);
        for c in 0..k {
            let col = &mut y[c * m..(c + 1) * m];
            for j in (i0..i1).rev() {
                col[j] /= u[j * ld + j];
                let x = col[j];
                if x == ZERO {
                    continue;
                }
                for i in i0..j {
                    col[i] -= u[j * ld + i] * x;
                }
            }
        }
        if i0 > 0 {
            let base = y.as_mut_ptr();
            // SAFETY: rows 0..i0 and i0..i1 of y are disjoint.
            unsafe {
                gemm_raw(
                    i0,
                    i1 - i0,
                    k,
                    -ONE,
                    u.as_ptr().add(i0 * ld),
                    1,
                    ld as isize,
                    base.add(i0),
                    1,
                    m as isize,
                    ONE,
                    base,
                    1,
                    m as isize,
                );
            }
        }
        i1 = i0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_2d(w: usize, h: usize, shift: C64) -> SparseMatrix {
        let mut t = Vec::new();
        for j in 0..h {
            for i in 0..w {
                let v = j * w + i;
                t.push((v, v, C64::new(4.0, 0.0) + shift));
                if i + 1 < w {
                    t.push((v, v + 1, C64::new(-1.0, 0.0)));
                    t.push((v + 1, v, C64::new(-1.0, 0.0)));
                }
                if j + 1 < h {
                    t.push((v, v + w, C64::new(-1.0, 0.3)));
                    t.push((v + w, v, C64::new(-1.0, -0.2)));
                }
            }
        }
        SparseMatrix::from_triplets(w * h, &t).unwrap()
    }

    #[test]
    fn solves_grid_operator() {
        let a = laplacian_2d(37, 29, C64::new(-0.5, 0.1));
        let f = factorize(&a).unwrap();
        let b: Vec<C64> = (0..a.dim()).map(|i| C64::new((i as f64).sin(), 1.0)).collect();
        let x = f.solve(&b).unwrap();
        assert!(a.relative_residual(&x, &b).unwrap() < 1e-12);
    }

    #[test]
    fn multi_rhs_matches_single() {
        let a = laplacian_2d(20, 20, C64::new(0.2, 0.0));
        let f = factorize(&a).unwrap();
        let b = Mat::from_fn(a.dim(), 3, |i, j| C64::new((i * (j + 1)) as f64 % 7.0, j as f64));
        let xs = f.solve_many(&b).unwrap();
        for j in 0..3 {
            let x = f.solve(b.col(j)).unwrap();
            assert!(crate::dense::rel_diff(xs.col(j), &x) < 1e-14);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = SparseMatrix::from_diagonal(&[ONE, ZERO, ONE]);
        assert!(matches!(factorize(&a), Err(Error::SingularPivot { .. })));
    }
}
