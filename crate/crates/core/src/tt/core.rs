use nalgebra::DMatrix;

/// One TT core of shape `(left, size, right)`.
///
/// Storage is column-major with index `a + left * (i + size * b)`, so the
/// left unfolding `(left * size) x right` and the right unfolding
/// `left x (size * right)` are both views of the same buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    left: usize,
    size: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn zeros(left: usize, size: usize, right: usize) -> Self {
        Self { left, size, right, data: vec![0.0; left * size * right] }
    }

    pub fn from_vec(left: usize, size: usize, right: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), left * size * right, "core buffer length");
        Self { left, size, right, data }
    }

    pub fn from_left_unfolding(left: usize, size: usize, m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), left * size);
        let right = m.ncols();
        Self { left, size, right, data: m.data.into() }
    }

    pub fn from_right_unfolding(size: usize, right: usize, m: DMatrix<f64>) -> Self {
        assert_eq!(m.ncols(), size * right);
        let left = m.nrows();
        Self { left, size, right, data: m.data.into() }
    }

    #[inline]
    pub fn left(&self) -> usize {
        self.left
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn right(&self) -> usize {
        self.right
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[a + self.left * (i + self.size * b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, v: f64) {
        self.data[a + self.left * (i + self.size * b)] = v;
    }

    pub fn left_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left * self.size, self.right, &self.data)
    }

    pub fn right_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left, self.size * self.right, &self.data)
    }

    /// Slice `G(i)` as an `left x right` matrix.
    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.left, self.right, |a, b| self.get(a, i, b))
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Mode product with a dense `m x size` matrix: `out(a, i, b) = sum_j e(i, j) G(a, j, b)`.
    pub fn mode_product(&self, e: &DMatrix<f64>) -> Core {
        assert_eq!(e.ncols(), self.size, "mode product size");
        let m = e.nrows();
        let mut out = Core::zeros(self.left, m, self.right);
        let l = self.left;
        for b in 0..self.right {
            for j in 0..self.size {
                let src = &self.data[l * (j + self.size * b)..l * (j + self.size * b) + l];
                for i in 0..m {
                    let w = e[(i, j)];
                    if w == 0.0 {
                        continue;
                    }
                    let off = l * (i + m * b);
                    let dst = &mut out.data[off..off + l];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        out
    }

    /// Mode product with a sparse matrix given as `(row, col, value)` triplets.
    pub fn mode_product_sparse(&self, rows: usize, entries: &[(usize, usize, f64)]) -> Core {
        let mut out = Core::zeros(self.left, rows, self.right);
        let l = self.left;
        for b in 0..self.right {
            for &(i, j, w) in entries {
                let s_off = l * (j + self.size * b);
                let d_off = l * (i + rows * b);
                for a in 0..l {
                    out.data[d_off + a] += w * self.data[s_off + a];
                }
            }
        }
        out
    }
}
