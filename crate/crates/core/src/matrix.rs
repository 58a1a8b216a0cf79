//! Numeric square matrices produced by evaluating an economy's coefficients.
//!
//! Coefficient matrices of real economies are extremely sparse, so the
//! evaluated form is compressed-column unless the fill is at or above
//! [`SPARSE_DENSITY_THRESHOLD`].

/// Fill ratio `nnz / n²` below which the sparse representation is used.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.1;

/// Compressed sparse column storage. Row indices within a column are
/// strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            col_ptr: vec![0; n + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from per-column `(row, value)` lists. Rows in each column must
    /// be strictly increasing and `< n`; explicit zeros are kept.
    pub fn from_columns(n: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(columns.len(), n, "expected {n} columns");
        let nnz = columns.iter().map(Vec::len).sum();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for col in columns {
            debug_assert!(col.windows(2).all(|w| w[0].0 < w[1].0));
            for (r, v) in col {
                assert!(r < n, "row {r} out of range");
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[range.clone()].binary_search(&i) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n);
        for j in 0..self.n {
            for (i, v) in self.column(j) {
                d.set(i, j, v);
            }
        }
        d
    }
}

/// Column-major dense storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds from row-major nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.n + i] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }
}

/// An evaluated coefficient matrix in whichever layout suits its fill.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffMatrix {
    Dense(DenseMatrix),
    Sparse(CscMatrix),
}

impl CoeffMatrix {
    /// Picks the layout for a compressed matrix by its fill ratio.
    pub fn from_csc(m: CscMatrix) -> Self {
        let n = m.dim();
        if n > 0 && (m.nnz() as f64) / ((n * n) as f64) >= SPARSE_DENSITY_THRESHOLD {
            CoeffMatrix::Dense(m.to_dense())
        } else {
            CoeffMatrix::Sparse(m)
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CoeffMatrix::Dense(m) => m.dim(),
            CoeffMatrix::Sparse(m) => m.dim(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, CoeffMatrix::Sparse(_))
    }

    pub fn nnz(&self) -> usize {
        match self {
            CoeffMatrix::Dense(m) => m.nnz(),
            CoeffMatrix::Sparse(m) => m.nnz(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            CoeffMatrix::Dense(m) => m.get(i, j),
            CoeffMatrix::Sparse(m) => m.get(i, j),
        }
    }

    /// Calls `f(row, col, value)` for every stored entry, column by column.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        match self {
            CoeffMatrix::Dense(m) => {
                for j in 0..m.dim() {
                    for (i, &v) in m.column(j).iter().enumerate() {
                        if v != 0.0 {
                            f(i, j, v);
                        }
                    }
                }
            }
            CoeffMatrix::Sparse(m) => {
                for j in 0..m.dim() {
                    for (i, v) in m.column(j) {
                        f(i, j, v);
                    }
                }
            }
        }
    }

    /// `M x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let mut y = vec![0.0; x.len()];
        self.for_each_entry(|i, j, v| y[i] += v * x[j]);
        y
    }

    /// `Mᵀ r`
    pub fn tr_mul_vec(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.dim());
        let mut y = vec![0.0; r.len()];
        self.for_each_entry(|i, j, v| y[j] += v * r[i]);
        y
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            CoeffMatrix::Dense(m) => m.clone(),
            CoeffMatrix::Sparse(m) => m.to_dense(),
        }
    }

    /// Largest column sum of absolute values.
    pub fn max_abs_column_sum(&self) -> f64 {
        let mut sums = vec![0.0f64; self.dim()];
        self.for_each_entry(|_, j, v| sums[j] += v.abs());
        sums.into_iter().fold(0.0, f64::max)
    }
}
