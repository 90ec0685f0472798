//! Compressed sparse column matrices, just enough for the QP engine.

/// CSC matrix. Row indices within each column are strictly increasing.
#[derive(Debug, Clone)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix { nrows, ncols, col_ptr: vec![0; ncols + 1], row_idx: Vec::new(), values: Vec::new() }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; ncols];
        for &(r, c, _) in triplets {
            debug_assert!(r < nrows && c < ncols);
            count[c] += 1;
        }
        let mut col_ptr = vec![0usize; ncols + 1];
        for c in 0..ncols {
            col_ptr[c + 1] = col_ptr[c] + count[c];
        }
        let nnz = col_ptr[ncols];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = col_ptr.clone();
        for &(r, c, v) in triplets {
            let p = next[c];
            row_idx[p] = r;
            values[p] = v;
            next[c] += 1;
        }
        // sort rows within each column and merge duplicates
        let mut out_ri = Vec::with_capacity(nnz);
        let mut out_vx = Vec::with_capacity(nnz);
        let mut out_cp = vec![0usize; ncols + 1];
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for c in 0..ncols {
            scratch.clear();
            for p in col_ptr[c]..col_ptr[c + 1] {
                scratch.push((row_idx[p], values[p]));
            }
            scratch.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < scratch.len() {
                let r = scratch[i].0;
                let mut v = scratch[i].1;
                let mut j = i + 1;
                while j < scratch.len() && scratch[j].0 == r {
                    v += scratch[j].1;
                    j += 1;
                }
                out_ri.push(r);
                out_vx.push(v);
                i = j;
            }
            out_cp[c + 1] = out_ri.len();
        }
        CscMatrix { nrows, ncols, col_ptr: out_cp, row_idx: out_ri, values: out_vx }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut count = vec![0usize; self.nrows];
        for &r in &self.row_idx {
            count[r] += 1;
        }
        let mut col_ptr = vec![0usize; self.nrows + 1];
        for r in 0..self.nrows {
            col_ptr[r + 1] = col_ptr[r] + count[r];
        }
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = col_ptr.clone();
        for c in 0..self.ncols {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[p];
                let q = next[r];
                row_idx[q] = c;
                values[q] = self.values[p];
                next[r] += 1;
            }
        }
        CscMatrix { nrows: self.ncols, ncols: self.nrows, col_ptr, row_idx, values }
    }

    /// y = A x
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[p]] += self.values[p] * xc;
            }
        }
    }

    /// y = A^T x
    pub fn mul_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                acc += self.values[p] * x[self.row_idx[p]];
            }
            y[c] = acc;
        }
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}
