use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kron::{Factor, KroneckerSumOperator, Term};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanbanParams {
    pub machines: usize,
    pub tickets: usize,
    pub processing_rates: Vec<f64>,
    /// `omega_i` for the transfer from machine `i` to `i + 1`.
    pub transfer_rates: Vec<f64>,
}

impl KanbanParams {
    pub fn new(machines: usize, tickets: usize, processing_rates: Vec<f64>, transfer_rates: Vec<f64>) -> Result<Self> {
        let p = Self { machines, tickets, processing_rates, transfer_rates };
        p.validate()?;
        Ok(p)
    }

    /// `mu_i = 1`, `omega_i = 0.1`.
    pub fn standard(machines: usize, tickets: usize) -> Self {
        Self::uniform(machines, tickets, 1.0, 0.1)
    }

    pub fn uniform(machines: usize, tickets: usize, processing: f64, transfer: f64) -> Self {
        Self {
            machines,
            tickets,
            processing_rates: vec![processing; machines],
            transfer_rates: vec![transfer; machines.saturating_sub(1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.machines < 2 {
            return Err(invalid("Kanban model needs at least two machines"));
        }
        if self.tickets == 0 {
            return Err(invalid("Kanban model needs at least one ticket"));
        }
        if self.processing_rates.len() != self.machines || self.transfer_rates.len() != self.machines - 1 {
            return Err(invalid(format!(
                "{} machines need {} processing and {} transfer rates, got {} and {}",
                self.machines,
                self.machines,
                self.machines - 1,
                self.processing_rates.len(),
                self.transfer_rates.len()
            )));
        }
        let rates = self.processing_rates.iter().chain(&self.transfer_rates);
        if rates.clone().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(invalid("Kanban rates must be positive and finite"));
        }
        Ok(())
    }

    /// True when `k = 2^m + 1`, the ticket counts the aggregation supports.
    pub fn aggregation_compatible(&self) -> bool {
        self.tickets >= 2 && (self.tickets - 1).is_power_of_two()
    }

    pub fn position(&self, machine: usize) -> MachinePosition {
        if machine == 0 {
            MachinePosition::First
        } else if machine + 1 == self.machines {
            MachinePosition::Last
        } else {
            MachinePosition::Middle
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..self.machines)
            .map(|i| enumerate_kanban_states(self.tickets, self.position(i)).len())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MachinePosition {
    First,
    Middle,
    Last,
}

/// Available tickets `a`, parts in process `b`, parts in the hopper `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KanbanState {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl KanbanState {
    pub fn new(a: usize, b: usize, c: usize) -> Self {
        Self { a, b, c }
    }
}

/// States of one machine in triangle order: `a` descending, then `b`
/// descending. First machines keep the `a = 0` edge, last machines the
/// `c = 0` row.
pub fn enumerate_kanban_states(k: usize, position: MachinePosition) -> Vec<KanbanState> {
    let mut out = Vec::new();
    for a in (0..=k).rev() {
        for b in (0..=k - a).rev() {
            let s = KanbanState::new(a, b, k - a - b);
            let keep = match position {
                MachinePosition::Middle => true,
                MachinePosition::First => s.a == 0,
                MachinePosition::Last => s.c == 0,
            };
            if keep {
                out.push(s);
            }
        }
    }
    out
}

/// Local, previous-synchronized and subsequent-synchronized factors of one
/// machine. Rates are placed on the local and subsequent factors; the
/// previous factor carries unit entries.
pub struct KanbanFactors {
    pub local: DMatrix<f64>,
    pub from_previous: DMatrix<f64>,
    pub to_next: DMatrix<f64>,
}

pub fn kanban_factors(k: usize, position: MachinePosition, mu: f64, omega: f64) -> KanbanFactors {
    let states = enumerate_kanban_states(k, position);
    let index: HashMap<KanbanState, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = states.len();
    let mut local = DMatrix::zeros(n, n);
    let mut from_previous = DMatrix::zeros(n, n);
    let mut to_next = DMatrix::zeros(n, n);
    let put = |m: &mut DMatrix<f64>, from: usize, to: KanbanState, v: f64| {
        m[(index[&to], from)] += v;
    };
    for (col, s) in states.iter().enumerate() {
        let KanbanState { a, b, c } = *s;
        match position {
            MachinePosition::Middle => {
                if b > 0 {
                    put(&mut local, col, KanbanState::new(a, b - 1, c + 1), mu);
                    local[(col, col)] -= mu;
                }
                if a > 0 {
                    put(&mut from_previous, col, KanbanState::new(a - 1, b + 1, c), 1.0);
                }
                if c > 0 {
                    put(&mut to_next, col, KanbanState::new(a + 1, b, c - 1), omega);
                }
            }
            MachinePosition::First => {
                if b > 0 {
                    put(&mut local, col, KanbanState::new(0, b - 1, c + 1), mu);
                    local[(col, col)] -= mu;
                }
                if c > 0 {
                    // The freed ticket is taken by a new part at once.
                    put(&mut to_next, col, KanbanState::new(0, b + 1, c - 1), omega);
                }
            }
            MachinePosition::Last => {
                if b > 0 {
                    // Finished parts leave and return their ticket.
                    put(&mut local, col, KanbanState::new(a + 1, b - 1, 0), mu);
                    local[(col, col)] -= mu;
                }
                if a > 0 {
                    put(&mut from_previous, col, KanbanState::new(a - 1, b + 1, 0), 1.0);
                }
            }
        }
    }
    KanbanFactors { local, from_previous, to_next }
}

pub fn build_kanban(p: &KanbanParams) -> Result<KroneckerSumOperator> {
    p.validate()?;
    let j = p.machines;
    let dims = p.dims();
    let factors: Vec<KanbanFactors> = (0..j)
        .map(|i| {
            let omega = if i + 1 < j { p.transfer_rates[i] } else { 0.0 };
            kanban_factors(p.tickets, p.position(i), p.processing_rates[i], omega)
        })
        .collect();
    let identity = || -> Vec<Factor> { dims.iter().map(|&n| Factor::Identity(n)).collect() };
    let mut terms = Vec::with_capacity(2 * j - 1);
    for (i, f) in factors.iter().enumerate() {
        let mut fs = identity();
        fs[i] = Factor::from_dense(f.local.clone());
        terms.push(Term::new(1.0, fs));
    }
    for i in 0..j - 1 {
        let mut fs = identity();
        fs[i] = Factor::from_dense(factors[i].to_next.clone());
        fs[i + 1] = Factor::from_dense(factors[i + 1].from_previous.clone());
        terms.push(Term::new(1.0, fs));
    }
    KroneckerSumOperator::new(terms)?.complete_generator()
}
