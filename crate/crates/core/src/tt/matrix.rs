use nalgebra::DMatrix;

use super::core::Core;
use super::policy::TruncationPolicy;
use super::vector::TtVector;
use crate::error::{invalid, mismatch, Error, Result};

/// An operator in TT matrix format.
///
/// Core `k` has shape `(r_{k-1}, m_k, n_k, r_k)`; it is stored as a TT
/// core whose mode index is `i + m_k * j`, so rounding the operator reuses
/// the vector machinery.
#[derive(Debug, Clone, PartialEq)]
pub struct TtMatrix {
    inner: TtVector,
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
}

impl TtMatrix {
    pub fn from_cores(cores: Vec<Core>, row_dims: Vec<usize>, col_dims: Vec<usize>) -> Result<Self> {
        if row_dims.len() != cores.len() || col_dims.len() != cores.len() {
            return Err(mismatch("row/col dims must match the number of cores"));
        }
        for (k, c) in cores.iter().enumerate() {
            if c.size() != row_dims[k] * col_dims[k] {
                return Err(mismatch(format!("core {k} size does not equal m_k * n_k")));
            }
        }
        Ok(Self { inner: TtVector::from_cores(cores)?, row_dims, col_dims })
    }

    /// Rank-one operator `M_1 ⊗ ... ⊗ M_J`.
    pub fn from_kron(factors: &[DMatrix<f64>]) -> Result<Self> {
        if factors.is_empty() {
            return Err(invalid("Kronecker product needs at least one factor"));
        }
        let cores = factors
            .iter()
            .map(|f| Core::from_vec(1, f.nrows() * f.ncols(), 1, f.as_slice().to_vec()))
            .collect();
        Self::from_cores(
            cores,
            factors.iter().map(|f| f.nrows()).collect(),
            factors.iter().map(|f| f.ncols()).collect(),
        )
    }

    pub fn identity(dims: &[usize]) -> Result<Self> {
        let f: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::identity(n, n)).collect();
        Self::from_kron(&f)
    }

    pub fn row_dims(&self) -> &[usize] {
        &self.row_dims
    }

    pub fn col_dims(&self) -> &[usize] {
        &self.col_dims
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.inner.ranks()
    }

    pub fn cores(&self) -> &[Core] {
        self.inner.cores()
    }

    /// Lossless compression of the operator cores (noise-level cutoff only).
    pub fn compress(&self, policy: TruncationPolicy) -> Self {
        Self {
            inner: self.inner.round(policy),
            row_dims: self.row_dims.clone(),
            col_dims: self.col_dims.clone(),
        }
    }

    /// Product cores without rounding: ranks multiply.
    pub fn matvec_unrounded(&self, x: &TtVector) -> Result<TtVector> {
        if x.dims() != self.col_dims {
            return Err(mismatch(format!(
                "operator column dims {:?} vs vector dims {:?}",
                self.col_dims,
                x.dims()
            )));
        }
        let mut cores = Vec::with_capacity(self.col_dims.len());
        for (k, xc) in x.cores().iter().enumerate() {
            let ac = &self.inner.cores()[k];
            let (ra0, ra1) = (ac.left(), ac.right());
            let (rx0, rx1) = (xc.left(), xc.right());
            let (m, n) = (self.row_dims[k], self.col_dims[k]);
            // Product ranks are indexed x-fastest: (c, a) -> c + rx0 * a.
            let left = ra0 * rx0;
            let mut out = Core::zeros(left, m, ra1 * rx1);
            let src = xc.data();
            let dst = out.data_mut();
            for b in 0..ra1 {
                for j in 0..n {
                    for i in 0..m {
                        for a in 0..ra0 {
                            let w = ac.get(a, i + m * j, b);
                            if w == 0.0 {
                                continue;
                            }
                            for d in 0..rx1 {
                                let s_off = rx0 * (j + n * d);
                                let d_off = rx0 * a + left * (i + m * (d + rx1 * b));
                                for (o, v) in dst[d_off..d_off + rx0].iter_mut().zip(&src[s_off..s_off + rx0]) {
                                    *o += w * v;
                                }
                            }
                        }
                    }
                }
            }
            cores.push(out);
        }
        Ok(TtVector::from_cores_unchecked(cores))
    }

    pub fn matvec(&self, x: &TtVector, policy: TruncationPolicy) -> Result<TtVector> {
        Ok(self.matvec_unrounded(x)?.round(policy))
    }

    /// Dense matrix in Kronecker order; fails above `limit` entries.
    pub fn to_dense(&self, limit: usize) -> Result<DMatrix<f64>> {
        let rows: usize = self.row_dims.iter().product();
        let cols: usize = self.col_dims.iter().product();
        let total = rows.saturating_mul(cols);
        if total > limit {
            return Err(Error::SizeLimit { size: total, limit });
        }
        // The operator is a TT vector over combined (i, j) indices; expand
        // it and scatter entries to global row/column positions.
        let j_modes = self.row_dims.len();
        let mut out = DMatrix::zeros(rows, cols);
        let full = self.inner.to_full_limited(limit)?;
        let sizes: Vec<usize> = (0..j_modes).map(|k| self.row_dims[k] * self.col_dims[k]).collect();
        let mut idx = vec![0usize; j_modes];
        for v in full {
            if v != 0.0 {
                let (mut r, mut c) = (0usize, 0usize);
                for k in 0..j_modes {
                    let m = self.row_dims[k];
                    r = r * m + idx[k] % m;
                    c = c * self.col_dims[k] + idx[k] / m;
                }
                out[(r, c)] += v;
            }
            for k in (0..j_modes).rev() {
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(out)
    }
}
