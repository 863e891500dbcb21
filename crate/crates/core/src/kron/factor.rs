use nalgebra::DMatrix;

use crate::tt::Core;

/// Factors at or above this size are stored as coordinate triplets.
pub const SPARSE_THRESHOLD: usize = 64;

/// One small matrix `E_j^t` of a Kronecker term.
#[derive(Debug, Clone)]
pub enum Factor {
    Identity(usize),
    Dense(DMatrix<f64>),
    Sparse {
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

impl Factor {
    /// Picks the cheapest faithful representation.
    pub fn from_dense(m: DMatrix<f64>) -> Self {
        let (r, c) = m.shape();
        if r == c && m == DMatrix::identity(r, c) {
            return Factor::Identity(r);
        }
        if r.max(c) < SPARSE_THRESHOLD {
            return Factor::Dense(m);
        }
        let mut entries = Vec::new();
        for j in 0..c {
            for i in 0..r {
                let v = m[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Factor::Sparse { rows: r, cols: c, entries }
    }

    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut m = DMatrix::zeros(rows, cols);
        for &(i, j, v) in triplets {
            m[(i, j)] += v;
        }
        Self::from_dense(m)
    }

    pub fn rows(&self) -> usize {
        match self {
            Factor::Identity(n) => *n,
            Factor::Dense(m) => m.nrows(),
            Factor::Sparse { rows, .. } => *rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Factor::Identity(n) => *n,
            Factor::Dense(m) => m.ncols(),
            Factor::Sparse { cols, .. } => *cols,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Factor::Identity(_))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Factor::Identity(n) => DMatrix::identity(*n, *n),
            Factor::Dense(m) => m.clone(),
            Factor::Sparse { rows, cols, entries } => {
                let mut m = DMatrix::zeros(*rows, *cols);
                for &(i, j, v) in entries {
                    m[(i, j)] += v;
                }
                m
            }
        }
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        match self {
            Factor::Identity(n) => (0..*n).map(|i| (i, i, 1.0)).collect(),
            Factor::Dense(m) => {
                let mut out = Vec::new();
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if m[(i, j)] != 0.0 {
                            out.push((i, j, m[(i, j)]));
                        }
                    }
                }
                out
            }
            Factor::Sparse { entries, .. } => entries.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Factor::Identity(_) => false,
            Factor::Dense(m) => m.iter().all(|&v| v == 0.0),
            Factor::Sparse { entries, .. } => entries.iter().all(|e| e.2 == 0.0),
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols()];
        for (_, j, v) in self.triplets() {
            s[j] += v;
        }
        s
    }

    pub fn diagonal(&self) -> Factor {
        match self {
            Factor::Identity(n) => Factor::Identity(*n),
            _ => {
                let d = self.to_dense();
                let n = d.nrows().min(d.ncols());
                Factor::from_dense(DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| {
                    if i == j && i < n {
                        d[(i, j)]
                    } else {
                        0.0
                    }
                }))
            }
        }
    }

    pub fn strict_lower(&self) -> Factor {
        let d = self.to_dense();
        Factor::from_dense(DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| if i > j { d[(i, j)] } else { 0.0 }))
    }

    pub fn strict_upper(&self) -> Factor {
        let d = self.to_dense();
        Factor::from_dense(DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| if i < j { d[(i, j)] } else { 0.0 }))
    }

    /// Induced 1-norm and infinity-norm.
    pub fn norms(&self) -> (f64, f64) {
        match self {
            Factor::Identity(_) => (1.0, 1.0),
            _ => crate::linalg::one_and_inf_norms(&self.to_dense()),
        }
    }

    /// Applies the factor along the mode index of a TT core.
    pub fn apply_to_core(&self, core: &Core) -> Core {
        match self {
            Factor::Identity(_) => core.clone(),
            Factor::Dense(m) => core.mode_product(m),
            Factor::Sparse { rows, entries, .. } => core.mode_product_sparse(*rows, entries),
        }
    }

    /// Exact equality of the represented matrices.
    pub fn same_as(&self, other: &Factor) -> bool {
        match (self, other) {
            (Factor::Identity(a), Factor::Identity(b)) => a == b,
            _ => self.rows() == other.rows() && self.cols() == other.cols() && self.to_dense() == other.to_dense(),
        }
    }
}

impl PartialEq for Factor {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}
