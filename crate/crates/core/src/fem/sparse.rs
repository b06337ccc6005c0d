use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// Compressed-row sparsity pattern with sorted column indices.
///
/// Patterns shared by several matrices also share the symbolic Cholesky
/// analysis, which is computed on first factorization.
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    pub(crate) symbolic: OnceLock<faer::sparse::linalg::solvers::SymbolicLlt<usize>>,
}

impl std::fmt::Debug for SparsityPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparsityPattern")
            .field("n", &self.n)
            .field("nnz", &self.col_idx.len())
            .finish()
    }
}

impl SparsityPattern {
    /// Build from per-row column lists (need not be sorted or unique).
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        SparsityPattern {
            n,
            row_ptr,
            col_idx,
            symbolic: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage offset of entry (i, j), if structurally present.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

/// Square sparse matrix in CSR storage.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseMatrix { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .position(i, j)
            .expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let rp = self.pattern.row_ptr();
        let ci = self.pattern.col_idx();
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in rp[i]..rp[i + 1] {
                s += self.values[k] * x[ci[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// xᵀ A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let rp = self.pattern.row_ptr();
        let ci = self.pattern.col_idx();
        let mut total = 0.0;
        for i in 0..self.dim() {
            let mut s = 0.0;
            for k in rp[i]..rp[i + 1] {
                s += self.values[k] * y[ci[k]];
            }
            total += x[i] * s;
        }
        total
    }

    /// `self + scale * other` for matrices sharing a pattern.
    pub fn plus_scaled(&self, scale: f64, other: &SparseMatrix) -> Result<SparseMatrix> {
        if !Arc::ptr_eq(&self.pattern, &other.pattern) {
            return Err(Error::InvalidArgument(
                "matrices do not share a sparsity pattern".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(SparseMatrix {
            pattern: self.pattern.clone(),
            values,
        })
    }

    pub fn scaled(&self, scale: f64) -> SparseMatrix {
        SparseMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| v * scale).collect(),
        }
    }

    /// Largest |A_ij − A_ji| relative to the largest |A_ij|.
    pub fn asymmetry(&self) -> f64 {
        let mut max_entry = 0.0f64;
        let mut max_diff = 0.0f64;
        for i in 0..self.dim() {
            for (k, &j) in self.pattern.row(i).iter().enumerate() {
                let v = self.values[self.pattern.row_ptr()[i] + k];
                max_entry = max_entry.max(v.abs());
                max_diff = max_diff.max((v - self.get(j, i)).abs());
            }
        }
        if max_entry == 0.0 {
            0.0
        } else {
            max_diff / max_entry
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for &j in self.pattern.row(i) {
                row[j] = self.get(i, j);
            }
        }
        d
    }
}
