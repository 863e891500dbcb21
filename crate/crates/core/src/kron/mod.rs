//! Operators of the form `A = sum_t c_t (E_1^t ⊗ ... ⊗ E_J^t)`.
//!
//! Every grid level keeps this representation. Dense and sparse assembly
//! exist only for validation and for the coarsest-grid solve.

mod factor;
mod split;

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

pub use factor::{Factor, SPARSE_THRESHOLD};
pub use split::{SweepOrder, TriangularSplit};

use crate::error::{invalid, mismatch, Error, Result};
use crate::tt::{Core, TruncationPolicy, TtMatrix, TtVector};

/// Default entry limit for `assemble_dense`.
pub const DEFAULT_DENSE_LIMIT: usize = 4_000_000;

/// Default number of terms accumulated between roundings in `apply`.
pub const DEFAULT_APPLY_STRIDE: usize = 4;

/// One Kronecker product term with a scalar coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub factors: Vec<Factor>,
}

impl Term {
    pub fn new(coeff: f64, factors: Vec<Factor>) -> Self {
        Self { coeff, factors }
    }

    fn is_zero(&self) -> bool {
        self.coeff == 0.0 || self.factors.iter().any(Factor::is_zero)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerSumOperator {
    terms: Vec<Term>,
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
}

impl KroneckerSumOperator {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| invalid("a Kronecker-sum operator needs at least one term"))?;
        if first.factors.is_empty() {
            return Err(invalid("terms need at least one factor"));
        }
        let row_dims: Vec<usize> = first.factors.iter().map(Factor::rows).collect();
        let col_dims: Vec<usize> = first.factors.iter().map(Factor::cols).collect();
        for (t, term) in terms.iter().enumerate() {
            if term.factors.len() != row_dims.len() {
                return Err(mismatch(format!(
                    "term {t} has {} factors, expected {}",
                    term.factors.len(),
                    row_dims.len()
                )));
            }
            for (j, f) in term.factors.iter().enumerate() {
                if f.rows() != row_dims[j] || f.cols() != col_dims[j] {
                    return Err(mismatch(format!(
                        "term {t} mode {j} is {}x{}, expected {}x{}",
                        f.rows(),
                        f.cols(),
                        row_dims[j],
                        col_dims[j]
                    )));
                }
            }
        }
        Ok(Self { terms, row_dims, col_dims })
    }

    /// Identity operator with a single all-identity term.
    pub fn identity(dims: &[usize]) -> Result<Self> {
        Self::new(vec![Term::new(1.0, dims.iter().map(|&n| Factor::Identity(n)).collect())])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn num_modes(&self) -> usize {
        self.row_dims.len()
    }

    pub fn row_dims(&self) -> &[usize] {
        &self.row_dims
    }

    pub fn col_dims(&self) -> &[usize] {
        &self.col_dims
    }

    pub fn rows(&self) -> usize {
        self.row_dims.iter().product()
    }

    pub fn cols(&self) -> usize {
        self.col_dims.iter().product()
    }

    pub fn is_square(&self) -> bool {
        self.row_dims == self.col_dims
    }

    /// Upper bound on the spectral norm from factor 1- and inf-norms.
    pub fn norm_estimate(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff.abs()
                    * t.factors
                        .iter()
                        .map(|f| {
                            let (a, b) = f.norms();
                            (a * b).sqrt()
                        })
                        .product::<f64>()
            })
            .sum()
    }

    fn apply_term(&self, term: &Term, x: &TtVector) -> TtVector {
        let mut cores: Vec<Core> = term
            .factors
            .iter()
            .zip(x.cores())
            .map(|(f, c)| f.apply_to_core(c))
            .collect();
        cores[0].scale(term.coeff);
        TtVector::from_cores_unchecked(cores)
    }

    /// `A x` term by term, rounding the running sum every `stride` terms
    /// and once at the end.
    pub fn apply(&self, x: &TtVector, policy: TruncationPolicy, stride: usize) -> Result<TtVector> {
        if x.dims() != self.col_dims {
            return Err(mismatch(format!(
                "operator column dims {:?} vs vector dims {:?}",
                self.col_dims,
                x.dims()
            )));
        }
        let stride = stride.max(1);
        let mut acc: Option<TtVector> = None;
        for (t, term) in self.terms.iter().enumerate() {
            let y = self.apply_term(term, x);
            acc = Some(match acc {
                None => y,
                Some(a) => a.add(&y)?,
            });
            if (t + 1) % stride == 0 && t + 1 < self.terms.len() {
                acc = acc.map(|a| a.round(policy));
            }
        }
        Ok(acc.expect("at least one term").round(policy))
    }

    /// TT-matrix form: block cores of rank `T`, then noise-level compression.
    pub fn to_tt_matrix(&self) -> TtMatrix {
        let t_count = self.terms.len();
        let j = self.num_modes();
        let mut cores = Vec::with_capacity(j);
        for k in 0..j {
            let (m, n) = (self.row_dims[k], self.col_dims[k]);
            let (l, r) = if j == 1 {
                (1, 1)
            } else if k == 0 {
                (1, t_count)
            } else if k == j - 1 {
                (t_count, 1)
            } else {
                (t_count, t_count)
            };
            let mut core = Core::zeros(l, m * n, r);
            for (t, term) in self.terms.iter().enumerate() {
                let (a, b) = if j == 1 {
                    (0, 0)
                } else if k == 0 {
                    (0, t)
                } else if k == j - 1 {
                    (t, 0)
                } else {
                    (t, t)
                };
                let scale = if k == 0 { term.coeff } else { 1.0 };
                for (ri, ci, v) in term.factors[k].triplets() {
                    let cur = core.get(a, ri + m * ci, b);
                    core.set(a, ri + m * ci, b, cur + scale * v);
                }
            }
            cores.push(core);
        }
        TtMatrix::from_cores(cores, self.row_dims.clone(), self.col_dims.clone())
            .expect("block cores are consistent")
            .compress(TruncationPolicy::exact())
    }

    /// Appends per-term column-sum compensators so that `1^T A = 0`.
    ///
    /// Zero compensators are dropped and terms that differ in at most one
    /// mode are merged afterwards.
    pub fn complete_generator(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(invalid("generator completion needs square factors"));
        }
        let mut terms = self.terms.clone();
        for term in &self.terms {
            let diag_factors: Vec<Factor> = term
                .factors
                .iter()
                .map(|f| {
                    if f.is_identity() {
                        return f.clone();
                    }
                    let s = f.column_sums();
                    Factor::from_dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s)))
                })
                .collect();
            let comp = Term::new(-term.coeff, diag_factors);
            if !comp.is_zero() {
                terms.push(comp);
            }
        }
        Self::new(terms).map(|op| op.simplified())
    }

    /// Drops zero terms and merges terms that agree in all modes but one.
    pub fn simplified(&self) -> Self {
        let mut terms: Vec<Term> = self.terms.iter().filter(|t| !t.is_zero()).cloned().collect();
        loop {
            let mut merged = false;
            'search: for a in 0..terms.len() {
                for b in a + 1..terms.len() {
                    let differing: Vec<usize> = (0..self.num_modes())
                        .filter(|&j| !terms[a].factors[j].same_as(&terms[b].factors[j]))
                        .collect();
                    if differing.len() > 1 {
                        continue;
                    }
                    let tb = terms.remove(b);
                    let ta = &mut terms[a];
                    match differing.first() {
                        None => ta.coeff += tb.coeff,
                        Some(&j) => {
                            let combined = ta.factors[j].to_dense() * ta.coeff + tb.factors[j].to_dense() * tb.coeff;
                            ta.factors[j] = Factor::from_dense(combined);
                            ta.coeff = 1.0;
                        }
                    }
                    merged = true;
                    break 'search;
                }
            }
            terms.retain(|t| !t.is_zero());
            if !merged {
                break;
            }
        }
        if terms.is_empty() {
            // Keep a valid (zero) operator.
            let mut zero = self.terms[0].clone();
            zero.coeff = 0.0;
            terms.push(zero);
        }
        Self { terms, row_dims: self.row_dims.clone(), col_dims: self.col_dims.clone() }
    }

    /// `sum_t c_t E_j^t`, the accumulated local structure of mode `j`.
    pub fn aux_local_matrix(&self, j: usize) -> Result<DMatrix<f64>> {
        if j >= self.num_modes() {
            return Err(invalid(format!("mode {j} out of range 0..{}", self.num_modes())));
        }
        let mut m = DMatrix::zeros(self.row_dims[j], self.col_dims[j]);
        for t in &self.terms {
            m += t.factors[j].to_dense() * t.coeff;
        }
        Ok(m)
    }

    /// Sum of the terms that act as the identity on every mode except `j`.
    pub fn local_matrix(&self, j: usize) -> Result<Option<DMatrix<f64>>> {
        if j >= self.num_modes() {
            return Err(invalid(format!("mode {j} out of range 0..{}", self.num_modes())));
        }
        let mut found = None;
        for t in &self.terms {
            let others_identity = t
                .factors
                .iter()
                .enumerate()
                .all(|(i, f)| i == j || f.is_identity());
            if others_identity && !t.factors[j].is_identity() {
                let add = t.factors[j].to_dense() * t.coeff;
                found = Some(match found {
                    None => add,
                    Some(m) => m + add,
                });
            }
        }
        Ok(found)
    }

    pub fn triangular_split(&self) -> Result<TriangularSplit> {
        TriangularSplit::new(self)
    }

    /// Factor-wise Petrov-Galerkin product `Q A P`.
    pub fn petrov_galerkin(&self, p: &[DMatrix<f64>], q: &[DMatrix<f64>]) -> Result<Self> {
        let j = self.num_modes();
        if p.len() != j || q.len() != j {
            return Err(mismatch("one P_j and one Q_j per mode are required"));
        }
        for k in 0..j {
            if q[k].ncols() != self.row_dims[k] || p[k].nrows() != self.col_dims[k] {
                return Err(mismatch(format!(
                    "mode {k}: Q is {}x{}, P is {}x{}, factor is {}x{}",
                    q[k].nrows(),
                    q[k].ncols(),
                    p[k].nrows(),
                    p[k].ncols(),
                    self.row_dims[k],
                    self.col_dims[k]
                )));
            }
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let factors = t
                    .factors
                    .iter()
                    .enumerate()
                    .map(|(k, f)| Factor::from_dense(&q[k] * f.to_dense() * &p[k]))
                    .collect();
                Term::new(t.coeff, factors)
            })
            .collect();
        Self::new(terms)
    }

    pub fn assemble_dense(&self) -> Result<DMatrix<f64>> {
        self.assemble_dense_limited(DEFAULT_DENSE_LIMIT)
    }

    pub fn assemble_dense_limited(&self, limit: usize) -> Result<DMatrix<f64>> {
        let (rows, cols) = (self.rows(), self.cols());
        let total = rows.saturating_mul(cols);
        if total > limit {
            return Err(Error::SizeLimit { size: total, limit });
        }
        let mut out = DMatrix::zeros(rows, cols);
        for (i, j, v) in self.assemble_triplets() {
            out[(i, j)] += v;
        }
        Ok(out)
    }

    /// Nonzero global entries, summed over terms and sorted by (col, row).
    pub fn assemble_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut all: Vec<(usize, usize, f64)> = Vec::new();
        for term in &self.terms {
            let mut acc = vec![(0usize, 0usize, term.coeff)];
            for (k, f) in term.factors.iter().enumerate() {
                let (m, n) = (self.row_dims[k], self.col_dims[k]);
                let trip = f.triplets();
                let mut next = Vec::with_capacity(acc.len() * trip.len());
                for &(r, c, v) in &acc {
                    for &(fi, fj, fv) in &trip {
                        next.push((r * m + fi, c * n + fj, v * fv));
                    }
                }
                acc = next;
            }
            all.extend(acc);
        }
        all.sort_by_key(|&(i, j, _)| (j, i));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(all.len());
        for (i, j, v) in all {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        merged
    }

    /// Writes one `row col value` line per nonzero (0-based indices).
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        write_triplet_file(path, &self.assemble_triplets())
    }
}

pub fn write_triplet_file(path: &Path, triplets: &[(usize, usize, f64)]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for &(i, j, v) in triplets {
        writeln!(f, "{i} {j} {v:e}")?;
    }
    f.flush()?;
    Ok(())
}
