use nalgebra::DMatrix;

use super::core::Core;
use super::policy::TruncationPolicy;
use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{thin_qr, thin_svd, truncation_rank};

/// Largest number of entries `to_full`/`from_full` will materialize.
pub const DEFAULT_FULL_LIMIT: usize = 10_000_000;

/// A tensor in TT format.
#[derive(Debug, Clone, PartialEq)]
pub struct TtVector {
    cores: Vec<Core>,
}

impl TtVector {
    /// Builds a TT vector from explicit cores, checking the rank chain.
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(invalid("a TT vector needs at least one core"));
        }
        if cores[0].left() != 1 || cores[cores.len() - 1].right() != 1 {
            return Err(invalid("boundary TT ranks must be 1"));
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].right() != w[1].left() {
                return Err(mismatch(format!(
                    "core {k} has right rank {} but core {} has left rank {}",
                    w[0].right(),
                    k + 1,
                    w[1].left()
                )));
            }
        }
        if cores.iter().any(|c| c.size() == 0 || c.left() == 0 || c.right() == 0) {
            return Err(invalid("mode sizes and ranks must be positive"));
        }
        Ok(Self { cores })
    }

    pub(crate) fn from_cores_unchecked(cores: Vec<Core>) -> Self {
        debug_assert!(Self::from_cores(cores.clone()).is_ok());
        Self { cores }
    }

    /// Rank-one tensor `u_1 ⊗ u_2 ⊗ ... ⊗ u_J`.
    pub fn from_elementary(factors: &[Vec<f64>]) -> Result<Self> {
        if factors.is_empty() {
            return Err(invalid("elementary tensor needs at least one factor"));
        }
        if factors.iter().any(|f| f.is_empty()) {
            return Err(invalid("elementary tensor factors must be nonempty"));
        }
        let cores = factors
            .iter()
            .map(|f| Core::from_vec(1, f.len(), 1, f.clone()))
            .collect();
        Ok(Self { cores })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let factors: Vec<Vec<f64>> = dims.iter().map(|&n| vec![0.0; n]).collect();
        Self::from_elementary(&factors)
    }

    pub fn ones(dims: &[usize]) -> Result<Self> {
        let factors: Vec<Vec<f64>> = dims.iter().map(|&n| vec![1.0; n]).collect();
        Self::from_elementary(&factors)
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<Core> {
        self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(Core::size).collect()
    }

    /// Full rank chain `r_0, ..., r_J`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.cores.len() + 1);
        r.push(1);
        r.extend(self.cores.iter().map(Core::right));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Number of stored core entries.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data().len()).sum()
    }

    /// Product of the mode sizes, saturating on overflow.
    pub fn full_len(&self) -> usize {
        self.cores.iter().fold(1usize, |acc, c| acc.saturating_mul(c.size()))
    }

    pub fn to_full(&self) -> Result<Vec<f64>> {
        self.to_full_limited(DEFAULT_FULL_LIMIT)
    }

    /// Dense vector in Kronecker order; fails above `limit` entries.
    pub fn to_full_limited(&self, limit: usize) -> Result<Vec<f64>> {
        let total = self.full_len();
        if total > limit {
            return Err(Error::SizeLimit { size: total, limit });
        }
        // acc: prefix-index x rank, row-major over the prefix multi-index.
        let mut acc = vec![1.0];
        let mut prefix = 1usize;
        let mut rank = 1usize;
        for core in &self.cores {
            let n = core.size();
            let r1 = core.right();
            let mut next = vec![0.0; prefix * n * r1];
            for p in 0..prefix {
                for i in 0..n {
                    for b in 0..r1 {
                        let mut s = 0.0;
                        for a in 0..rank {
                            s += acc[p * rank + a] * core.get(a, i, b);
                        }
                        next[(p * n + i) * r1 + b] = s;
                    }
                }
            }
            acc = next;
            prefix *= n;
            rank = r1;
        }
        Ok(acc)
    }

    /// TT-SVD of a dense tensor given in Kronecker order.
    pub fn from_full(values: &[f64], dims: &[usize], policy: TruncationPolicy) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&n| n == 0) {
            return Err(invalid("dims must be nonempty and positive"));
        }
        let total: usize = dims.iter().product();
        if total != values.len() {
            return Err(mismatch(format!(
                "tensor has {} entries but dims multiply to {total}",
                values.len()
            )));
        }
        if total > DEFAULT_FULL_LIMIT {
            return Err(Error::SizeLimit { size: total, limit: DEFAULT_FULL_LIMIT });
        }
        let j = dims.len();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let delta = if j > 1 {
            policy.rel_tolerance * norm / ((j - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut cores = Vec::with_capacity(j);
        // Remainder as a (rank x rest) row-major block, rest in Kronecker order.
        let mut rem = values.to_vec();
        let mut rank = 1usize;
        let mut rest = total;
        for (k, &n) in dims.iter().enumerate() {
            rest /= n;
            if k == j - 1 {
                let mut core = Core::zeros(rank, n, 1);
                for a in 0..rank {
                    for i in 0..n {
                        core.set(a, i, 0, rem[a * n + i]);
                    }
                }
                cores.push(core);
                break;
            }
            // Unfolding with row index a + rank * i and column index = rest.
            let unfolding = DMatrix::from_fn(rank * n, rest, |row, col| {
                let a = row % rank;
                let i = row / rank;
                rem[a * n * rest + i * rest + col]
            });
            let svd = thin_svd(unfolding);
            let r = truncation_rank(&svd.s, delta, policy.max_rank);
            let u = svd.u.columns(0, r).into_owned();
            cores.push(Core::from_left_unfolding(rank, n, u));
            let mut next = vec![0.0; r * rest];
            for a in 0..r {
                for col in 0..rest {
                    next[a * rest + col] = svd.s[a] * svd.vt[(a, col)];
                }
            }
            rem = next;
            rank = r;
        }
        Ok(Self { cores })
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(mismatch(format!(
                "TT dims {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    /// Exact sum with block-structured cores; internal ranks add.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        let j = self.order();
        if j == 1 {
            let mut c = self.cores[0].clone();
            for (d, s) in c.data_mut().iter_mut().zip(other.cores[0].data()) {
                *d += s;
            }
            return Ok(Self { cores: vec![c] });
        }
        let mut cores = Vec::with_capacity(j);
        for k in 0..j {
            let x = &self.cores[k];
            let y = &other.cores[k];
            let n = x.size();
            let (l, r) = match k {
                0 => (1, x.right() + y.right()),
                _ if k == j - 1 => (x.left() + y.left(), 1),
                _ => (x.left() + y.left(), x.right() + y.right()),
            };
            let mut c = Core::zeros(l, n, r);
            let (yl, yr) = match k {
                0 => (0, x.right()),
                _ if k == j - 1 => (x.left(), 0),
                _ => (x.left(), x.right()),
            };
            for i in 0..n {
                for b in 0..x.right() {
                    for a in 0..x.left() {
                        c.set(a, i, b, x.get(a, i, b));
                    }
                }
                for b in 0..y.right() {
                    for a in 0..y.left() {
                        c.set(a + yl, i, b + yr, y.get(a, i, b));
                    }
                }
            }
            cores.push(c);
        }
        Ok(Self { cores })
    }

    /// `alpha * self`; only the first core is touched.
    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.cores[0].scale(alpha);
        out
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        self.cores[0].scale(alpha);
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.add(&other.scale(alpha))
    }

    /// Euclidean inner product by a left-to-right contraction sweep.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_dims(other)?;
        // w: (rx x ry)
        let mut w = DMatrix::from_element(1, 1, 1.0);
        for (x, y) in self.cores.iter().zip(&other.cores) {
            let mut next = DMatrix::zeros(x.right(), y.right());
            for i in 0..x.size() {
                let xs = x.slice(i);
                let ys = y.slice(i);
                next += xs.transpose() * (&w * ys);
            }
            w = next;
        }
        Ok(w[(0, 0)])
    }

    /// 2-norm via a left-orthogonalizing QR sweep.
    pub fn norm(&self) -> f64 {
        let mut carry = DMatrix::from_element(1, 1, 1.0);
        let j = self.order();
        for (k, core) in self.cores.iter().enumerate() {
            let m = carry_into(&carry, core);
            if k == j - 1 {
                return m.frobenius_norm();
            }
            let (_, r) = thin_qr(m.left_unfolding());
            carry = r;
        }
        unreachable!("TT vector has at least one core")
    }

    /// Sum of all entries, i.e. the inner product with the all-ones tensor.
    pub fn sum(&self) -> f64 {
        let mut w = DMatrix::from_element(1, 1, 1.0);
        for core in &self.cores {
            let mut s = DMatrix::zeros(core.left(), core.right());
            for i in 0..core.size() {
                s += core.slice(i);
            }
            w = w * s;
        }
        w[(0, 0)]
    }

    /// Single entry `G_1(i_1) ... G_J(i_J)`.
    pub fn entry(&self, index: &[usize]) -> Result<f64> {
        if index.len() != self.order() {
            return Err(mismatch("index length differs from tensor order"));
        }
        let mut w = DMatrix::from_element(1, 1, 1.0);
        for (core, &i) in self.cores.iter().zip(index) {
            if i >= core.size() {
                return Err(invalid(format!("index {i} out of range {}", core.size())));
            }
            w = w * core.slice(i);
        }
        Ok(w[(0, 0)])
    }

    /// Right-to-left orthogonalization followed by left-to-right SVD truncation.
    pub fn round(&self, policy: TruncationPolicy) -> Self {
        let j = self.order();
        if j == 1 {
            return self.clone();
        }
        let mut cores = self.cores.clone();
        // Right-to-left: make cores 1..J-1 row-orthogonal.
        for k in (1..j).rev() {
            let c = &cores[k];
            let (n, r1) = (c.size(), c.right());
            let (q, r) = thin_qr(c.right_unfolding().transpose());
            let new_rank = q.ncols();
            cores[k] = Core::from_right_unfolding(n, r1, q.transpose());
            let prev = &cores[k - 1];
            let merged = prev.left_unfolding() * r.transpose();
            debug_assert_eq!(merged.ncols(), new_rank);
            cores[k - 1] = Core::from_left_unfolding(prev.left(), prev.size(), merged);
        }
        let norm = cores[0].frobenius_norm();
        let delta = policy.rel_tolerance * norm / ((j - 1) as f64).sqrt();
        // Left-to-right truncation.
        for k in 0..j - 1 {
            let c = &cores[k];
            let (l, n) = (c.left(), c.size());
            let svd = thin_svd(c.left_unfolding());
            let r = truncation_rank(&svd.s, delta, policy.max_rank);
            let u = svd.u.columns(0, r).into_owned();
            let mut sv = svd.vt.rows(0, r).into_owned();
            for a in 0..r {
                sv.row_mut(a).scale_mut(svd.s[a]);
            }
            cores[k] = Core::from_left_unfolding(l, n, u);
            let next = &cores[k + 1];
            let merged = sv * next.right_unfolding();
            cores[k + 1] = Core::from_right_unfolding(next.size(), next.right(), merged);
        }
        Self { cores }
    }

    /// Applies a per-mode dense matrix to every core (a Kronecker product
    /// operator); ranks are unchanged.
    pub fn apply_kron(&self, mats: &[&DMatrix<f64>]) -> Result<Self> {
        if mats.len() != self.order() {
            return Err(mismatch("number of factors differs from tensor order"));
        }
        let mut cores = Vec::with_capacity(mats.len());
        for (core, m) in self.cores.iter().zip(mats) {
            if m.ncols() != core.size() {
                return Err(mismatch(format!(
                    "factor has {} columns but mode size is {}",
                    m.ncols(),
                    core.size()
                )));
            }
            cores.push(core.mode_product(m));
        }
        Ok(Self { cores })
    }

    pub fn effective_rank(&self) -> f64 {
        effective_rank(&self.dims(), self.storage())
    }
}

/// Multiplies `carry` (r' x r_{k-1}) into the left rank index of a core.
fn carry_into(carry: &DMatrix<f64>, core: &Core) -> Core {
    let merged = carry * core.right_unfolding();
    Core::from_right_unfolding(core.size(), core.right(), merged)
}

/// Uniform rank with the same core storage as `storage` for mode sizes `dims`.
///
/// Solves `(sum of interior n_k) r^2 + (n_1 + n_J) r = storage`.
pub fn effective_rank(dims: &[usize], storage: usize) -> f64 {
    let j = dims.len();
    if j < 2 {
        return 1.0;
    }
    let a: f64 = dims[1..j - 1].iter().map(|&n| n as f64).sum();
    let b = (dims[0] + dims[j - 1]) as f64;
    let s = storage as f64;
    if a == 0.0 {
        return s / b;
    }
    (-b + (b * b + 4.0 * a * s).sqrt()) / (2.0 * a)
}
