/// Compressed sparse row matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Row-by-row builder.
#[derive(Debug, Clone)]
pub struct CsrBuilder {
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(ncols: usize) -> Self {
        Self { ncols, indptr: vec![0], indices: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, col: usize, v: f64) {
        debug_assert!(col < self.ncols);
        self.indices.push(col);
        self.values.push(v);
    }

    pub fn end_row(&mut self) {
        self.indptr.push(self.indices.len());
    }

    pub fn finish(self) -> Csr {
        Csr {
            nrows: self.indptr.len() - 1,
            ncols: self.ncols,
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
        }
    }
}

impl Csr {
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `out = A x`
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for (r, o) in out.iter_mut().enumerate().take(self.nrows) {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *o = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for k in 0..self.ncols {
            counts[k + 1] += counts[k];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let slot = next[c];
                indices[slot] = r;
                values[slot] = self.values[k];
                next[c] += 1;
            }
        }
        Csr { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }

    /// `Σ_r w_r A_rc²` for every column `c`.
    pub fn weighted_column_squares(&self, w: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.ncols];
        for (r, &wr) in w.iter().enumerate().take(self.nrows) {
            for k in self.indptr[r]..self.indptr[r + 1] {
                d[self.indices[k]] += wr * self.values[k] * self.values[k];
            }
        }
        d
    }
}
