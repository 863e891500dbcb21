//! Small dense kernels shared by the tensor and multigrid code.

use std::sync::Once;

use faer::{Mat, MatRef, Par};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as noise.
pub const NOISE_CUTOFF: f64 = 1e-14;

/// Thin SVD with singular values sorted in descending order.
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
}

pub fn thin_svd(m: DMatrix<f64>) -> ThinSvd {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return ThinSvd { u: DMatrix::zeros(rows, 0), s: Vec::new(), vt: DMatrix::zeros(0, cols) };
    }
    sequential();
    let fm = to_faer(&m);
    match fm.thin_svd() {
        Ok(svd) => ThinSvd {
            u: from_faer(svd.U()),
            s: (0..k).map(|i| svd.S()[i]).collect(),
            vt: from_faer(svd.V()).transpose(),
        },
        // Only reachable on non-finite input; nalgebra keeps NaN
        // propagation visible to the caller.
        Err(_) => {
            let svd = m.svd(true, true);
            ThinSvd {
                u: svd.u.expect("u requested"),
                s: svd.singular_values.iter().copied().collect(),
                vt: svd.v_t.expect("v_t requested"),
            }
        }
    }
}

// Dense kernels run single-threaded so that results are reproducible.
fn sequential() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(Par::Seq));
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Number of singular values to keep so that the discarded tail has
/// 2-norm at most `abs_tol`, after dropping values below the noise cutoff.
/// Always at least one and at most `max_rank`.
pub fn truncation_rank(s: &[f64], abs_tol: f64, max_rank: usize) -> usize {
    if s.is_empty() || s[0] == 0.0 {
        return 1;
    }
    let floor = s[0] * NOISE_CUTOFF;
    let mut r = s.iter().take_while(|&&v| v > floor).count().max(1);
    let mut tail = s[r..].iter().map(|v| v * v).sum::<f64>();
    let budget = abs_tol * abs_tol;
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next > budget {
            break;
        }
        tail = next;
        r -= 1;
    }
    r.min(max_rank).max(1)
}

/// Householder QR returning thin (Q, R).
pub fn thin_qr(m: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    if rows.min(cols) == 0 {
        return (DMatrix::zeros(rows, rows.min(cols)), DMatrix::zeros(rows.min(cols), cols));
    }
    sequential();
    let qr = to_faer(&m).qr();
    (from_faer(qr.compute_thin_Q().as_ref()), from_faer(qr.thin_R()))
}

/// Moore-Penrose pseudo-inverse with relative singular value cutoff `rcond`.
pub fn pseudo_inverse(a: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let svd = thin_svd(a.clone());
    let cutoff = svd.s.first().copied().unwrap_or(0.0) * rcond;
    let k = svd.s.len();
    let mut vs = svd.vt.transpose();
    for j in 0..k {
        let inv = if svd.s[j] > cutoff && svd.s[j] > 0.0 {
            1.0 / svd.s[j]
        } else {
            0.0
        };
        vs.column_mut(j).scale_mut(inv);
    }
    vs * svd.u.transpose()
}

/// Right singular vector for the smallest singular value of a square matrix.
pub fn smallest_right_singular_vector(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "smallest singular vector needs a nonempty square matrix".into(),
        ));
    }
    let svd = thin_svd(a.clone());
    if svd.s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("SVD of a non-finite matrix".into()));
    }
    Ok(svd.vt.row(a.nrows() - 1).transpose())
}

/// Null vector of a square matrix of corank one, via column-pivoted QR.
///
/// Fails if the second smallest pivot is also negligible.
pub fn null_vector(a: &DMatrix<f64>, rel_tol: f64) -> Result<DVector<f64>> {
    let n = a.nrows();
    if n != a.ncols() || n == 0 {
        return Err(Error::InvalidArgument("null vector needs a square matrix".into()));
    }
    if n == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let p = qr.p();
    let scale = r[(0, 0)].abs();
    if scale == 0.0 {
        return Err(Error::Numerical("zero matrix has no unique null vector".into()));
    }
    if r[(n - 2, n - 2)].abs() <= rel_tol * scale {
        return Err(Error::Numerical(format!(
            "matrix is numerically rank deficient beyond corank one (pivot ratio {:.3e})",
            r[(n - 2, n - 2)].abs() / scale
        )));
    }
    // R y = 0 with y_{n-1} = 1.
    let mut y = DVector::zeros(n);
    y[n - 1] = 1.0;
    for i in (0..n - 1).rev() {
        let mut acc = r[(i, n - 1)];
        for j in i + 1..n - 1 {
            acc += r[(i, j)] * y[j];
        }
        y[i] = -acc / r[(i, i)];
    }
    // Undo the column permutation: A P = Q R, so x = P y.
    p.inv_permute_rows(&mut y);
    Ok(y)
}

/// Minimum-norm least-squares solution, singular values below `rcond`
/// times the largest treated as zero.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    pseudo_inverse(a, rcond) * b
}

/// Row-sum and column-sum norms of a dense matrix.
pub fn one_and_inf_norms(m: &DMatrix<f64>) -> (f64, f64) {
    let one = (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let inf = (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    (one, inf)
}
