//! Compressed sparse column storage and the handful of kernels the solver
//! needs: mat-vec with either orientation, transpose, sparse products, and
//! row/column norms for equilibration.
//!
//! Explicit zeros are dropped on construction so structural nonzero counts
//! (empty-row, singleton-row detection in presolve) mean what they say.

/// Sparse matrix in compressed sparse column form.
///
/// Row indices inside each column are strictly increasing and duplicate
/// entries have been summed. Entries that sum to exactly zero are removed.
#[derive(Clone, Debug, PartialEq)]
pub struct Csc {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csc {
    /// Builds from (row, col, value) triplets. Duplicates are summed,
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets
            .iter()
            .copied()
            .filter(|&(_, _, v)| v != 0.0)
            .collect();
        for &(i, j, _) in &entries {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of bounds");
        }
        entries.sort_by_key(|&(i, j, _)| (j, i));

        // duplicates are adjacent after the sort; merge as we copy
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries.drain(..) {
            match merged.last_mut() {
                Some((li, lj, lv)) if *li == i && *lj == j => *lv += v,
                _ => merged.push((i, j, v)),
            }
        }
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for &(i, j, v) in &merged {
            row_idx.push(i);
            values.push(v);
            col_ptr[j + 1] += 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut out = Csc { nrows, ncols, col_ptr, row_idx, values };
        out.drop_zeros();
        out
    }

    /// Builds from a dense row-major table. Intended for tests and tiny
    /// hand-written systems.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut trips = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense input");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trips.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trips)
    }

    /// Identity of order n.
    pub fn identity(n: usize) -> Self {
        Csc {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut col_ptr = vec![0usize; self.ncols + 1];
        let mut row_idx = Vec::with_capacity(self.row_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                if self.values[p] != 0.0 {
                    row_idx.push(self.row_idx[p]);
                    values.push(self.values[p]);
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        self.col_ptr = col_ptr;
        self.row_idx = row_idx;
        self.values = values;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Fraction of structurally nonzero entries.
    pub fn density(&self) -> f64 {
        if self.nrows == 0 || self.ncols == 0 {
            0.0
        } else {
            self.nnz() as f64 / (self.nrows as f64 * self.ncols as f64)
        }
    }

    /// Row indices and values of column j.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn col_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_add(x, &mut y, 1.0);
        y
    }

    /// y += alpha * A x.
    pub fn spmv_add(&self, x: &[f64], y: &mut [f64], alpha: f64) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for j in 0..self.ncols {
            let xj = alpha * x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * xj;
            }
        }
    }

    /// y = A' x.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.spmv_t_add(x, &mut y, 1.0);
        y
    }

    /// y += alpha * A' x.
    pub fn spmv_t_add(&self, x: &[f64], y: &mut [f64], alpha: f64) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc += self.values[p] * x[self.row_idx[p]];
            }
            y[j] += alpha * acc;
        }
    }

    pub fn transpose(&self) -> Csc {
        let mut col_ptr = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            col_ptr[i + 1] += 1;
        }
        for i in 0..self.nrows {
            col_ptr[i + 1] += col_ptr[i];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let q = next[i];
                next[i] += 1;
                row_idx[q] = j;
                values[q] = self.values[p];
            }
        }
        Csc { nrows: self.ncols, ncols: self.nrows, col_ptr, row_idx, values }
    }

    /// C = A B, classic column-by-column product with a dense scatter
    /// workspace.
    pub fn mul(&self, other: &Csc) -> Csc {
        assert_eq!(self.ncols, other.nrows, "dimension mismatch in product");
        let m = self.nrows;
        let n = other.ncols;
        let mut marker = vec![usize::MAX; m];
        let mut work = vec![0.0f64; m];
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            let mut pattern: Vec<usize> = Vec::new();
            let (brows, bvals) = other.col(j);
            for (&k, &bkj) in brows.iter().zip(bvals) {
                let (arows, avals) = self.col(k);
                for (&i, &aik) in arows.iter().zip(avals) {
                    if marker[i] != j {
                        marker[i] = j;
                        pattern.push(i);
                        work[i] = 0.0;
                    }
                    work[i] += aik * bkj;
                }
            }
            pattern.sort_unstable();
            for &i in &pattern {
                if work[i] != 0.0 {
                    row_idx.push(i);
                    values.push(work[i]);
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        Csc { nrows: m, ncols: n, col_ptr, row_idx, values }
    }

    /// A A' as a symmetric CSC matrix (full storage).
    pub fn aat(&self) -> Csc {
        self.mul(&self.transpose())
    }

    /// A' A as a symmetric CSC matrix (full storage).
    pub fn ata(&self) -> Csc {
        self.transpose().mul(self)
    }

    /// Adds `shift` to every diagonal entry, extending the pattern where the
    /// diagonal is structurally absent. Requires a square matrix.
    pub fn add_diagonal(&self, shift: f64) -> Csc {
        assert_eq!(self.nrows, self.ncols);
        let mut trips = Vec::with_capacity(self.nnz() + self.nrows);
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                trips.push((i, j, v));
            }
            trips.push((j, j, shift));
        }
        Csc::from_triplets(self.nrows, self.ncols, &trips)
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.nrows];
        for p in 0..self.nnz() {
            acc[self.row_idx[p]] += self.values[p] * self.values[p];
        }
        acc.iter().map(|v| v.sqrt()).collect()
    }

    /// Euclidean norm of every column.
    pub fn col_norms(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| self.col(j).1.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// A <- diag(d) A.
    pub fn scale_rows(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.nrows);
        for p in 0..self.row_idx.len() {
            self.values[p] *= d[self.row_idx[p]];
        }
    }

    /// A <- A diag(d).
    pub fn scale_cols(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.ncols);
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                self.values[p] *= d[j];
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                out[i][j] = v;
            }
        }
        out
    }

    /// Number of structural nonzeros in each row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut c = vec![0usize; self.nrows];
        for &i in &self.row_idx {
            c[i] += 1;
        }
        c
    }

    /// Raw parts: (col_ptr, row_idx, values).
    pub fn parts(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.col_ptr, &self.row_idx, &self.values)
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
