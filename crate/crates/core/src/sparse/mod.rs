//! Sparse matrices, a multifrontal direct solver and GMRES.

pub mod gmres;
pub mod lu;
pub mod ordering;

pub use gmres::{gmres, GmresOptions, GmresStats};
pub use lu::{factorize, Factorization};

use crate::dense::{Mat, ZERO};
use crate::error::{check_len, Error, Result};
use crate::C64;

/// Square complex matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, C64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidDimension(format!("entry ({i}, {j}) outside {n}×{n}")));
            }
            rows[i].push((j, v));
        }
        Ok(Self::from_rows(n, rows))
    }

    /// Builds from per-row entry lists; duplicates are summed.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = col_idx.len();
            for (j, v) in row {
                if col_idx.len() > start && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(d: &[C64]) -> Self {
        SparseMatrix {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            col_idx: (0..d.len()).collect(),
            values: d.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.n).map(|i| self.row_nnz(i)).max().unwrap_or(0)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => ZERO,
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n, x.len())?;
        Ok((0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum()
            })
            .collect())
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(self.n, rows)
    }

    /// Exact entrywise comparison with the transpose.
    pub fn is_symmetric(&self) -> bool {
        *self == self.transpose()
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `||A x - b|| / ||b||`.
    pub fn relative_residual(&self, x: &[C64], b: &[C64]) -> Result<f64> {
        let ax = self.matvec(x)?;
        Ok(crate::dense::rel_diff(&ax, b))
    }
}
