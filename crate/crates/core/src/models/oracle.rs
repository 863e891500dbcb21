//! Direct enumeration of global states and transitions.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};

use super::kanban::{enumerate_kanban_states, KanbanParams, KanbanState, MachinePosition};
use super::overflow::OverflowParams;
use super::Model;
use crate::error::{invalid, Error, Result};
use crate::linalg::null_vector;

pub const ORACLE_STATE_LIMIT: usize = 50_000;

/// Entry limit of the dense null-space solve in `oracle_stationary`.
pub const ORACLE_DENSE_LIMIT: usize = 4_000_000;

/// Generator stored as column-sorted coordinate triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGenerator {
    pub size: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl SparseGenerator {
    fn from_transitions(size: usize, transitions: Vec<(usize, usize, f64)>) -> Self {
        let mut diag = vec![0.0; size];
        let mut all = Vec::with_capacity(transitions.len() + size);
        for (to, from, rate) in transitions {
            if rate != 0.0 && to != from {
                all.push((to, from, rate));
                diag[from] -= rate;
            }
        }
        all.extend(diag.iter().enumerate().filter(|(_, &d)| d != 0.0).map(|(i, &d)| (i, i, d)));
        all.sort_by_key(|&(i, j, _)| (j, i));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(all.len());
        for (i, j, v) in all {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        Self { size, triplets: merged }
    }

    pub fn to_dense(&self, limit: usize) -> Result<DMatrix<f64>> {
        let total = self.size.saturating_mul(self.size);
        if total > limit {
            return Err(Error::SizeLimit { size: total, limit });
        }
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(i, j, v) in &self.triplets {
            m[(i, j)] += v;
        }
        Ok(m)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size];
        for &(i, j, v) in &self.triplets {
            y[i] += v * x[j];
        }
        y
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.size];
        for &(_, j, v) in &self.triplets {
            s[j] += v;
        }
        s
    }
}

fn mixed_radix(index: &[usize], dims: &[usize]) -> usize {
    index.iter().zip(dims).fold(0, |acc, (&i, &n)| acc * n + i)
}

fn for_each_state(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; dims.len()];
    let total: usize = dims.iter().product();
    for _ in 0..total {
        f(&idx);
        for k in (0..dims.len()).rev() {
            idx[k] += 1;
            if idx[k] < dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn overflow_transitions(p: &OverflowParams) -> Vec<(usize, usize, f64)> {
    let dims = p.dims();
    let mut out = Vec::new();
    for_each_state(&dims, |s| {
        let from = mixed_radix(s, &dims);
        let mut moved = |q: usize, delta: isize, rate: f64| {
            let mut t = s.to_vec();
            t[q] = (t[q] as isize + delta) as usize;
            out.push((mixed_radix(&t, &dims), from, rate));
        };
        for i in 0..s.len() {
            let cap = p.capacities[i];
            if s[i] < cap {
                moved(i, 1, p.arrival_rates[i]);
            } else if i + 1 < s.len() && s[i + 1] < p.capacities[i + 1] {
                // Overflow into the adjacent queue only.
                moved(i + 1, 1, p.arrival_rates[i]);
            }
            if s[i] > 0 {
                moved(i, -1, p.service_rates[i]);
            }
        }
    });
    out
}

fn kanban_transitions(p: &KanbanParams) -> Vec<(usize, usize, f64)> {
    let j = p.machines;
    let states: Vec<Vec<KanbanState>> = (0..j).map(|i| enumerate_kanban_states(p.tickets, p.position(i))).collect();
    let lookup: Vec<HashMap<KanbanState, usize>> = states
        .iter()
        .map(|ss| ss.iter().enumerate().map(|(i, &s)| (s, i)).collect())
        .collect();
    let dims: Vec<usize> = states.iter().map(Vec::len).collect();
    let mut out = Vec::new();
    for_each_state(&dims, |idx| {
        let from = mixed_radix(idx, &dims);
        let cur: Vec<KanbanState> = idx.iter().enumerate().map(|(m, &i)| states[m][i]).collect();
        let mut emit = |changes: &[(usize, KanbanState)], rate: f64| {
            let mut t = idx.to_vec();
            for &(m, s) in changes {
                t[m] = lookup[m][&s];
            }
            out.push((mixed_radix(&t, &dims), from, rate));
        };
        for m in 0..j {
            let KanbanState { a, b, c } = cur[m];
            // Processing finishes.
            if b > 0 {
                let next = match p.position(m) {
                    MachinePosition::Last => KanbanState::new(a + 1, b - 1, 0),
                    _ => KanbanState::new(a, b - 1, c + 1),
                };
                emit(&[(m, next)], p.processing_rates[m]);
            }
            // A finished part moves on when the next machine has a ticket.
            if m + 1 < j && c > 0 && cur[m + 1].a > 0 {
                let here = match p.position(m) {
                    MachinePosition::First => KanbanState::new(0, b + 1, c - 1),
                    _ => KanbanState::new(a + 1, b, c - 1),
                };
                let n = cur[m + 1];
                let there = KanbanState::new(n.a - 1, n.b + 1, n.c);
                emit(&[(m, here), (m + 1, there)], p.transfer_rates[m]);
            }
        }
    });
    out
}

/// Generator assembled from enumeration rules, with zero column sums by
/// construction. Returned sparse; use `to_dense` for small instances.
pub fn oracle_generator(model: &Model) -> Result<SparseGenerator> {
    model.validate()?;
    let n = model.state_count();
    if n > ORACLE_STATE_LIMIT {
        return Err(Error::SizeLimit { size: n, limit: ORACLE_STATE_LIMIT });
    }
    let transitions = match model {
        Model::Overflow(p) => overflow_transitions(p),
        Model::Kanban(p) => kanban_transitions(p),
    };
    Ok(SparseGenerator::from_transitions(n, transitions))
}

/// Strong connectivity of the transition graph.
pub fn check_irreducible(g: &SparseGenerator) -> bool {
    if g.size == 0 {
        return false;
    }
    let mut fwd = vec![Vec::new(); g.size];
    let mut bwd = vec![Vec::new(); g.size];
    for &(i, j, v) in &g.triplets {
        if i != j && v != 0.0 {
            fwd[j].push(i);
            bwd[i].push(j);
        }
    }
    let reach_all = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; g.size];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == g.size
    };
    reach_all(&fwd) && reach_all(&bwd)
}

/// Normalized null vector of a dense generator via column-pivoted QR.
pub fn oracle_stationary(g: &DMatrix<f64>) -> Result<DVector<f64>> {
    if g.nrows() != g.ncols() {
        return Err(invalid("generator must be square"));
    }
    let total = g.nrows() * g.ncols();
    if total > ORACLE_DENSE_LIMIT {
        return Err(Error::SizeLimit { size: total, limit: ORACLE_DENSE_LIMIT });
    }
    let mut x = null_vector(g, 1e-10)?;
    let s = x.sum();
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Numerical("null vector has zero sum".into()));
    }
    x /= s;
    // Roundoff can leave tiny negative entries.
    x.iter_mut().for_each(|v| {
        if *v < 0.0 && *v > -1e-13 {
            *v = 0.0;
        }
    });
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::Numerical("stationary vector has negative entries".into()));
    }
    Ok(x)
}
