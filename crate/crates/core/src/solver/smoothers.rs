use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Result};
use crate::kron::{KroneckerSumOperator, DEFAULT_APPLY_STRIDE};
use crate::linalg::least_squares;
use crate::tt::{TruncationPolicy, TtMatrix, TtVector};

/// Anything that can act on TT vectors.
pub trait TtOperator {
    fn dims(&self) -> Vec<usize>;

    /// Exact product; ranks may grow.
    fn apply_unrounded(&self, x: &TtVector) -> Result<TtVector>;

    fn apply(&self, x: &TtVector, policy: TruncationPolicy) -> Result<TtVector> {
        Ok(self.apply_unrounded(x)?.round(policy))
    }
}

impl TtOperator for TtMatrix {
    fn dims(&self) -> Vec<usize> {
        self.col_dims().to_vec()
    }

    fn apply_unrounded(&self, x: &TtVector) -> Result<TtVector> {
        self.matvec_unrounded(x)
    }
}

impl TtOperator for KroneckerSumOperator {
    fn dims(&self) -> Vec<usize> {
        self.col_dims().to_vec()
    }

    fn apply_unrounded(&self, x: &TtVector) -> Result<TtVector> {
        KroneckerSumOperator::apply(self, x, TruncationPolicy::exact(), usize::MAX)
    }

    fn apply(&self, x: &TtVector, policy: TruncationPolicy) -> Result<TtVector> {
        KroneckerSumOperator::apply(self, x, policy, DEFAULT_APPLY_STRIDE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherKind {
    #[default]
    Gmres,
    GaussSeidel,
    Richardson,
}

/// `b - A x`, rounded. A missing `b` stands for zero.
pub fn residual(a: &dyn TtOperator, b: Option<&TtVector>, x: &TtVector, policy: TruncationPolicy) -> Result<TtVector> {
    let ax = a.apply(x, policy)?;
    match b {
        None => Ok(ax.scale(-1.0)),
        Some(b) => Ok(b.axpy(-1.0, &ax)?.round(policy)),
    }
}

/// Linear combination rounded after every addition, so ranks stay near the
/// cap instead of growing with the number of terms.
fn combine(terms: &[(f64, &TtVector)], policy: TruncationPolicy) -> Result<TtVector> {
    let mut acc = terms[0].1.scale(terms[0].0);
    for (c, v) in &terms[1..] {
        if *c != 0.0 {
            acc = acc.axpy(*c, v)?.round(policy);
        }
    }
    Ok(acc)
}

const BREAKDOWN_TOL: f64 = 1e-10;

/// `steps` Arnoldi iterations of GMRES from `x0`, rounding every basis
/// vector and the update. Returns `x0` unchanged if its residual is zero.
pub fn gmres_smooth(
    a: &dyn TtOperator,
    b: Option<&TtVector>,
    x0: &TtVector,
    steps: usize,
    policy: TruncationPolicy,
) -> Result<TtVector> {
    if a.dims() != x0.dims() {
        return Err(mismatch("operator and iterate dimensions differ"));
    }
    let r0 = residual(a, b, x0, policy)?;
    let beta = r0.norm();
    let scale = b.map_or(0.0, TtVector::norm).max(x0.norm());
    if beta == 0.0 || !beta.is_finite() || beta <= 1e-15 * scale {
        return Ok(x0.clone());
    }
    let mut basis = vec![r0.scale(1.0 / beta)];
    let mut h = DMatrix::<f64>::zeros(steps + 1, steps);
    let mut k = 0;
    for i in 0..steps {
        let w = a.apply(&basis[i], policy)?;
        let w_norm = w.norm();
        // Classical Gram-Schmidt against the rounded basis.
        let coeffs: Vec<f64> = basis.iter().map(|v| w.dot(v)).collect::<Result<_>>()?;
        let mut parts: Vec<(f64, &TtVector)> = vec![(1.0, &w)];
        for (j, v) in basis.iter().enumerate() {
            h[(j, i)] = coeffs[j];
            parts.push((-coeffs[j], v));
        }
        let w = combine(&parts, policy)?;
        let norm = w.norm();
        h[(i + 1, i)] = norm;
        k = i + 1;
        // Below this the new direction is rounding noise.
        if norm <= policy.rel_tolerance.max(BREAKDOWN_TOL) * w_norm || !norm.is_finite() {
            break;
        }
        basis.push(w.scale(1.0 / norm));
    }
    let hk = h.view((0, 0), (k + 1, k)).into_owned();
    let mut rhs = DVector::zeros(k + 1);
    rhs[0] = beta;
    let y = least_squares(&hk, &rhs, 1e-14);
    let mut parts: Vec<(f64, &TtVector)> = vec![(1.0, x0)];
    for (j, v) in basis.iter().take(k).enumerate() {
        parts.push((y[j], v));
    }
    combine(&parts, policy)
}

/// Settings of the inner solve that applies `(D - L)^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSolverConfig {
    /// Relative residual target.
    pub tolerance: f64,
    /// Number of restarted GMRES cycles.
    pub max_sweeps: usize,
    /// Krylov dimension per cycle.
    pub restart: usize,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        Self { tolerance: 1e-7, max_sweeps: 20, restart: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerReport {
    pub converged: bool,
    pub relative_residual: f64,
    pub sweeps: usize,
}

// Truncation limits how far the inner residual can fall; cycles that gain
// less than this factor count as stalled.
const STALL_RATIO: f64 = 0.9;
const STALL_LIMIT: usize = 3;

/// Restarted truncated GMRES for `m y = r` from `y = 0`. Returns the best
/// iterate seen.
pub fn inner_solve(
    m: &dyn TtOperator,
    r: &TtVector,
    cfg: &InnerSolverConfig,
    policy: TruncationPolicy,
) -> Result<(TtVector, InnerReport)> {
    let rn = r.norm();
    let mut y = TtVector::zeros(&r.dims())?;
    if rn == 0.0 {
        return Ok((y, InnerReport { converged: true, relative_residual: 0.0, sweeps: 0 }));
    }
    let mut best = (y.clone(), 1.0);
    let mut sweeps = 0;
    let mut stalled = 0;
    while sweeps < cfg.max_sweeps {
        y = gmres_smooth(m, Some(r), &y, cfg.restart.max(1), policy)?;
        sweeps += 1;
        let rel = r.axpy(-1.0, &m.apply_unrounded(&y)?)?.norm() / rn;
        if rel < best.1 {
            stalled = if rel > STALL_RATIO * best.1 { stalled + 1 } else { 0 };
            best = (y.clone(), rel);
        } else {
            stalled += 1;
            y = best.0.clone();
        }
        if best.1 <= cfg.tolerance || stalled >= STALL_LIMIT {
            break;
        }
    }
    let (y, rel) = best;
    Ok((y, InnerReport { converged: rel <= cfg.tolerance, relative_residual: rel, sweeps }))
}

/// One sweep `x = x0 + M^{-1}(b - A x0)` with `M = D - L`, the inverse
/// applied approximately by `inner_solve`.
pub fn gauss_seidel_smooth(
    a: &dyn TtOperator,
    m: &dyn TtOperator,
    b: Option<&TtVector>,
    x0: &TtVector,
    inner: &InnerSolverConfig,
    policy: TruncationPolicy,
) -> Result<(TtVector, InnerReport)> {
    let r = residual(a, b, x0, policy)?;
    let (y, report) = inner_solve(m, &r, inner, policy)?;
    Ok((x0.axpy(1.0, &y)?.round(policy), report))
}

/// `steps` damped Richardson steps `x += omega (b - A x)`.
pub fn richardson_smooth(
    a: &dyn TtOperator,
    b: Option<&TtVector>,
    x0: &TtVector,
    steps: usize,
    omega: f64,
    policy: TruncationPolicy,
) -> Result<TtVector> {
    let mut x = x0.clone();
    for _ in 0..steps {
        let r = residual(a, b, &x, policy)?;
        x = x.axpy(omega, &r)?.round(policy);
    }
    Ok(x)
}
