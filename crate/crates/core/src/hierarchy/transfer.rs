use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// Per-mode interpolation `P_j` and restriction `Q_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferPair {
    pub p: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
}

impl TransferPair {
    pub fn coarse_dims(&self) -> Vec<usize> {
        self.p.iter().map(|p| p.ncols()).collect()
    }
}

/// Full coarsening of an odd chain: the even-indexed points stay.
pub fn full_coarsen_chain(n: usize) -> Result<Vec<usize>> {
    if n < 3 || n % 2 == 0 {
        return Err(invalid(format!("full coarsening needs an odd chain of at least 3 points, got {n}")));
    }
    Ok((0..n).step_by(2).collect())
}

/// Linear interpolation and its transpose. Interpolation rows sum to one, so
/// every column of `Q = P^T` does too.
pub fn linear_transfer(n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let coarse = full_coarsen_chain(n)?;
    let p = linear_interpolation(n, &coarse);
    let q = p.transpose();
    Ok((p, q))
}

fn linear_interpolation(n: usize, coarse: &[usize]) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, coarse.len());
    for i in 0..n {
        match coarse.binary_search(&i) {
            Ok(c) => p[(i, c)] = 1.0,
            Err(pos) => {
                let (left, right) = (pos.checked_sub(1), (pos < coarse.len()).then_some(pos));
                match (left, right) {
                    (Some(l), Some(r)) => {
                        let (xl, xr) = (coarse[l] as f64, coarse[r] as f64);
                        let t = (i as f64 - xl) / (xr - xl);
                        p[(i, l)] = 1.0 - t;
                        p[(i, r)] = t;
                    }
                    (Some(c), None) | (None, Some(c)) => p[(i, c)] = 1.0,
                    (None, None) => {}
                }
            }
        }
    }
    p
}

/// Interpolation weighted by `|e_local[i, c]|` over the coarse points `c`
/// that fine point `i` couples to. Rows without coarse couplings fall back
/// to linear weights.
pub fn direct_interpolation(e_local: &DMatrix<f64>, coarse: &[usize]) -> Result<DMatrix<f64>> {
    let n = e_local.nrows();
    if e_local.ncols() != n {
        return Err(invalid("local matrix must be square"));
    }
    if coarse.iter().any(|&c| c >= n) || coarse.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("coarse points must be increasing and inside the chain"));
    }
    let linear = linear_interpolation(n, coarse);
    let mut p = DMatrix::zeros(n, coarse.len());
    for i in 0..n {
        if let Ok(c) = coarse.binary_search(&i) {
            p[(i, c)] = 1.0;
            continue;
        }
        let weights: Vec<f64> = coarse.iter().map(|&c| e_local[(i, c)].abs()).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            for (c, w) in weights.iter().enumerate() {
                p[(i, c)] = w / total;
            }
        } else {
            p.set_row(i, &linear.row(i));
        }
    }
    Ok(p)
}

/// Boolean aggregation interpolation with `Q = P^T`.
pub fn aggregation_operators(map: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let coarse = map.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; coarse];
    for &c in map {
        seen[c] = true;
    }
    if map.is_empty() || seen.contains(&false) {
        return Err(invalid("aggregation map must cover every coarse index"));
    }
    let p = DMatrix::from_fn(map.len(), coarse, |i, c| if map[i] == c { 1.0 } else { 0.0 });
    let q = p.transpose();
    Ok((p, q))
}
