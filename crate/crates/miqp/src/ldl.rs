//! Sparse LDL^T factorization for symmetric quasi-definite matrices.
//!
//! The KKT systems produced by the QP engine are quasi-definite (positive
//! diagonal on the primal block, negative on the dual block), so an LDL^T
//! factorization without pivoting exists under any symmetric permutation.
//! A reverse Cuthill-McKee ordering keeps fill-in low on the near-banded
//! systems produced by horizon-structured problems.

use crate::sparse::CscMatrix;

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern given as
/// upper-triangular CSC. Returns `perm` with `perm[new] = old`.
pub fn rcm_order(n: usize, upper: &CscMatrix) -> Vec<usize> {
    // adjacency (both triangles, no diagonal)
    let mut deg = vec![0usize; n];
    for c in 0..n {
        for p in upper.col_ptr[c]..upper.col_ptr[c + 1] {
            let r = upper.row_idx[p];
            if r != c {
                deg[r] += 1;
                deg[c] += 1;
            }
        }
    }
    let mut adj_ptr = vec![0usize; n + 1];
    for i in 0..n {
        adj_ptr[i + 1] = adj_ptr[i] + deg[i];
    }
    let mut adj = vec![0usize; adj_ptr[n]];
    let mut next = adj_ptr.clone();
    for c in 0..n {
        for p in upper.col_ptr[c]..upper.col_ptr[c + 1] {
            let r = upper.row_idx[p];
            if r != c {
                adj[next[r]] = c;
                next[r] += 1;
                adj[next[c]] = r;
                next[c] += 1;
            }
        }
    }
    for i in 0..n {
        adj[adj_ptr[i]..adj_ptr[i + 1]].sort_unstable();
    }

    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    // process each connected component from a min-degree seed
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&i| (deg[i], i));
    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> =
                adj[adj_ptr[v]..adj_ptr[v + 1]].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (deg[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[derive(Debug, thiserror::Error)]
pub enum LdlError {
    #[error("matrix is structurally singular at pivot {0}")]
    Singular(usize),
}

/// LDL^T factor of a permuted symmetric matrix.
pub struct LdlFactor {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    iperm: Vec<usize>,
    parent: Vec<isize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    /// permuted upper-triangular input pattern (kept for refactorization)
    ap: Vec<usize>,
    ai: Vec<usize>,
    ax: Vec<f64>,
    /// expected sign of each pivot, used for static regularization
    dsign: Vec<f64>,
    pub reg_bumps: usize,
    // workspaces
    work_y: Vec<f64>,
    work_flag: Vec<usize>,
    work_path: Vec<usize>,
    work_pattern: Vec<usize>,
    next_free: Vec<usize>,
}

impl LdlFactor {
    /// Symbolic + numeric factorization of an upper-triangular CSC matrix.
    /// `dsign[i]` gives the expected pivot sign of original index i (+1/-1);
    /// pivots that cross zero are bumped to `sign * reg` (static regularization).
    pub fn new(upper: &CscMatrix, dsign: &[f64], reg: f64) -> Result<Self, LdlError> {
        let n = upper.ncols;
        let perm = rcm_order(n, upper);
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        // permute: entry (r,c) upper -> (iperm r, iperm c), keep upper half
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(upper.nnz());
        for c in 0..n {
            for p in upper.col_ptr[c]..upper.col_ptr[c + 1] {
                let r = upper.row_idx[p];
                let (nr, nc) = (iperm[r], iperm[c]);
                let (a, b) = if nr <= nc { (nr, nc) } else { (nc, nr) };
                trip.push((a, b, upper.values[p]));
            }
        }
        let pa = CscMatrix::from_triplets(n, n, &trip);
        let mut f = LdlFactor {
            n,
            iperm,
            parent: vec![-1; n],
            lp: vec![0; n + 1],
            li: Vec::new(),
            lx: Vec::new(),
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            ap: pa.col_ptr,
            ai: pa.row_idx,
            ax: pa.values,
            dsign: perm.iter().map(|&old| dsign[old]).collect(),
            perm,
            reg_bumps: 0,
            work_y: vec![0.0; n],
            work_flag: vec![usize::MAX; n],
            work_path: vec![0; n],
            work_pattern: vec![0; n],
            next_free: vec![0; n],
        };
        f.symbolic();
        f.numeric(reg)?;
        Ok(f)
    }

    fn symbolic(&mut self) {
        let n = self.n;
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            self.parent[k] = -1;
        }
        // walk true parent pointers so every node of the row-k pattern is
        // counted; path-compressed walks would skip interior chain nodes
        for k in 0..n {
            self.work_flag[k] = k;
            for p in self.ap[k]..self.ap[k + 1] {
                let mut i = self.ai[p];
                if i >= k {
                    continue;
                }
                while self.work_flag[i] != k {
                    self.work_flag[i] = k;
                    lnz[i] += 1;
                    if self.parent[i] == -1 {
                        self.parent[i] = k as isize;
                        i = k;
                    } else {
                        i = self.parent[i] as usize;
                    }
                }
            }
        }
        self.lp[0] = 0;
        for k in 0..n {
            self.lp[k + 1] = self.lp[k] + lnz[k];
        }
        let total = self.lp[n];
        self.li = vec![0; total];
        self.lx = vec![0.0; total];
        for v in self.work_flag.iter_mut() {
            *v = usize::MAX;
        }
    }

    /// Numeric factorization with the existing symbolic structure.
    pub fn numeric(&mut self, reg: f64) -> Result<(), LdlError> {
        let n = self.n;
        self.reg_bumps = 0;
        self.next_free.copy_from_slice(&self.lp[..n]);
        for v in self.work_flag.iter_mut() {
            *v = usize::MAX;
        }
        for v in self.work_y.iter_mut() {
            *v = 0.0;
        }
        for k in 0..n {
            let mut top = n;
            let mut dk = 0.0;
            self.work_flag[k] = k;
            for p in self.ap[k]..self.ap[k + 1] {
                let i = self.ai[p];
                if i == k {
                    dk = self.ax[p];
                    continue;
                }
                self.work_y[i] += self.ax[p];
                let mut len = 0usize;
                let mut j = i;
                while self.work_flag[j] != k {
                    self.work_path[len] = j;
                    len += 1;
                    self.work_flag[j] = k;
                    let pj = self.parent[j];
                    debug_assert!(pj >= 0, "broken elimination tree");
                    j = pj as usize;
                }
                // reversed path: ancestors must be processed after descendants
                let mut t = len;
                while t > 0 {
                    t -= 1;
                    top -= 1;
                    self.work_pattern[top] = self.work_path[t];
                }
            }
            for idx in top..n {
                let i = self.work_pattern[idx];
                let yi = self.work_y[i];
                self.work_y[i] = 0.0;
                for p in self.lp[i]..self.next_free[i] {
                    self.work_y[self.li[p]] -= self.lx[p] * yi;
                }
                let lki = yi * self.dinv[i];
                dk -= lki * yi;
                let slot = self.next_free[i];
                self.li[slot] = k;
                self.lx[slot] = lki;
                self.next_free[i] += 1;
            }
            let sign = self.dsign[k];
            if dk.is_nan() {
                return Err(LdlError::Singular(k));
            }
            if dk * sign <= 0.0 || dk.abs() < reg {
                dk = sign * reg.max(1e-13);
                self.reg_bumps += 1;
            }
            self.d[k] = dk;
            self.dinv[k] = 1.0 / dk;
        }
        Ok(())
    }

    /// Replaces the numeric values of the stored (permuted) matrix. The
    /// sparsity pattern must match the one passed to `new`.
    pub fn update_values(&mut self, upper: &CscMatrix) {
        let n = self.n;
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(upper.nnz());
        for c in 0..n {
            for p in upper.col_ptr[c]..upper.col_ptr[c + 1] {
                let r = upper.row_idx[p];
                let (nr, nc) = (self.iperm[r], self.iperm[c]);
                let (a, b) = if nr <= nc { (nr, nc) } else { (nc, nr) };
                trip.push((a, b, upper.values[p]));
            }
        }
        let pa = CscMatrix::from_triplets(n, n, &trip);
        debug_assert_eq!(pa.col_ptr, self.ap);
        self.ax = pa.values;
    }

    /// Solves K x = b in place.
    pub fn solve(&self, b: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.n;
        scratch.resize(n, 0.0);
        for new in 0..n {
            scratch[new] = b[self.perm[new]];
        }
        for i in 0..n {
            let zi = scratch[i];
            if zi != 0.0 {
                for p in self.lp[i]..self.lp[i + 1] {
                    scratch[self.li[p]] -= self.lx[p] * zi;
                }
            }
        }
        for i in 0..n {
            scratch[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut zi = scratch[i];
            for p in self.lp[i]..self.lp[i + 1] {
                zi -= self.lx[p] * scratch[self.li[p]];
            }
            scratch[i] = zi;
        }
        for new in 0..n {
            b[self.perm[new]] = scratch[new];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut x = b.to_vec();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()).unwrap();
            m.swap(col, piv);
            x.swap(col, piv);
            let d = m[col][col];
            for r in col + 1..n {
                let f = m[r][col] / d;
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                x[r] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            x[col] /= m[col][col];
            for r in 0..col {
                x[r] -= m[r][col] * x[col];
            }
        }
        x
    }

    #[test]
    fn factors_quasi_definite_kkt() {
        // [[2, 0, 1], [0, 3, -1], [1, -1, -1]]: 2x2 SPD block, one negative dual pivot
        let upper = CscMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (1, 1, 3.0), (0, 2, 1.0), (1, 2, -1.0), (2, 2, -1.0)],
        );
        let dense = vec![
            vec![2.0, 0.0, 1.0],
            vec![0.0, 3.0, -1.0],
            vec![1.0, -1.0, -1.0],
        ];
        let f = LdlFactor::new(&upper, &[1.0, 1.0, -1.0], 1e-13).unwrap();
        let b = vec![1.0, -2.0, 0.5];
        let mut x = b.clone();
        let mut scratch = Vec::new();
        f.solve(&mut x, &mut scratch);
        let want = dense_solve(&dense, &b);
        for (a, w) in x.iter().zip(&want) {
            assert!((a - w).abs() < 1e-10, "{a} vs {w}");
        }
    }

    #[test]
    fn random_kkt_matches_dense() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = 4 + (trial % 5);
            let m = 3 + (trial % 4);
            let dim = n + m;
            let mut dense = vec![vec![0.0; dim]; dim];
            let mut trip = Vec::new();
            for i in 0..n {
                let v = rng.gen_range(0.5..3.0);
                dense[i][i] = v;
                trip.push((i, i, v));
            }
            for i in 0..m {
                let v = -rng.gen_range(0.5..3.0);
                dense[n + i][n + i] = v;
                trip.push((n + i, n + i, v));
            }
            for i in 0..m {
                for j in 0..n {
                    if rng.gen_bool(0.4) {
                        let v = rng.gen_range(-2.0..2.0);
                        dense[j][n + i] = v;
                        dense[n + i][j] = v;
                        trip.push((j, n + i, v));
                    }
                }
            }
            let upper = CscMatrix::from_triplets(dim, dim, &trip);
            let mut dsign = vec![1.0; n];
            dsign.extend(vec![-1.0; m]);
            let f = LdlFactor::new(&upper, &dsign, 1e-13).unwrap();
            let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut x = b.clone();
            let mut scratch = Vec::new();
            f.solve(&mut x, &mut scratch);
            let want = dense_solve(&dense, &b);
            for (a, w) in x.iter().zip(&want) {
                assert!((a - w).abs() < 1e-8, "trial {trial}: {a} vs {w}");
            }
        }
    }
}
