use serde::{Deserialize, Serialize};

use super::{Factor, KroneckerSumOperator, Term};
use crate::error::{invalid, Result};

/// Which mode is most significant in the global ordering that defines
/// "lower" and "upper".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Plain lexicographic order of the vectorization, mode 1 slowest.
    #[default]
    FirstModeMajor,
    /// Mode `J` slowest. For the Kanban line this sweeps against the
    /// direction in which parts travel.
    LastModeMajor,
}

/// `A = D - L - U` with every part kept in Kronecker-sum form.
#[derive(Debug, Clone)]
pub struct TriangularSplit {
    pub d: KroneckerSumOperator,
    pub l: KroneckerSumOperator,
    pub u: KroneckerSumOperator,
}

impl TriangularSplit {
    pub fn new(op: &KroneckerSumOperator) -> Result<Self> {
        Self::with_order(op, SweepOrder::FirstModeMajor)
    }

    pub fn with_order(op: &KroneckerSumOperator, order: SweepOrder) -> Result<Self> {
        if !op.is_square() {
            return Err(invalid("triangular splitting needs square factors"));
        }
        let dims = op.row_dims().to_vec();
        let modes: Vec<usize> = match order {
            SweepOrder::FirstModeMajor => (0..dims.len()).collect(),
            SweepOrder::LastModeMajor => (0..dims.len()).rev().collect(),
        };
        let mut d_terms = Vec::new();
        let mut l_terms = Vec::new();
        let mut u_terms = Vec::new();
        for term in op.terms() {
            let diags: Vec<Factor> = term.factors.iter().map(Factor::diagonal).collect();
            d_terms.push(Term::new(term.coeff, diags.clone()));
            for (pos, &j) in modes.iter().enumerate() {
                for (part, out) in [
                    (term.factors[j].strict_lower(), &mut l_terms),
                    (term.factors[j].strict_upper(), &mut u_terms),
                ] {
                    // More significant modes must match, less significant ones are free.
                    let mut factors = term.factors.clone();
                    for &m in &modes[..pos] {
                        factors[m] = diags[m].clone();
                    }
                    factors[j] = part;
                    let t = Term::new(-term.coeff, factors);
                    if !t.is_zero() {
                        out.push(t);
                    }
                }
            }
        }
        let build = |terms: Vec<Term>| -> Result<KroneckerSumOperator> {
            if terms.is_empty() {
                let zero = Term::new(0.0, dims.iter().map(|&n| Factor::Identity(n)).collect());
                return KroneckerSumOperator::new(vec![zero]);
            }
            Ok(KroneckerSumOperator::new(terms)?.simplified())
        };
        Ok(Self { d: build(d_terms)?, l: build(l_terms)?, u: build(u_terms)? })
    }

    /// `M = D - L`, the lower triangle of `A` including its diagonal in the
    /// chosen ordering.
    pub fn lower_with_diagonal(&self) -> Result<KroneckerSumOperator> {
        let mut terms = self.d.terms().to_vec();
        terms.extend(self.l.terms().iter().map(|t| Term::new(-t.coeff, t.factors.clone())));
        Ok(KroneckerSumOperator::new(terms)?.simplified())
    }
}
