//! Benchmark chains: the overflow queuing network and the Kanban
//! manufacturing system, plus enumeration oracles that never touch the
//! Kronecker machinery.

mod kanban;
mod oracle;
mod overflow;

use serde::{Deserialize, Serialize};

pub use kanban::{build_kanban, enumerate_kanban_states, kanban_factors, KanbanParams, KanbanState, MachinePosition};
pub use oracle::{check_irreducible, oracle_generator, oracle_stationary, SparseGenerator, ORACLE_DENSE_LIMIT, ORACLE_STATE_LIMIT};
pub use overflow::{birth_death_stationary, build_overflow, build_overflow_non_interacting, OverflowParams};

use crate::error::Result;
use crate::kron::KroneckerSumOperator;

/// Either benchmark model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Overflow(OverflowParams),
    Kanban(KanbanParams),
}

impl Model {
    pub fn operator(&self) -> Result<KroneckerSumOperator> {
        match self {
            Model::Overflow(p) => build_overflow(p),
            Model::Kanban(p) => build_kanban(p),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            Model::Overflow(p) => p.dims(),
            Model::Kanban(p) => p.dims(),
        }
    }

    pub fn state_count(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Overflow(p) => p.validate(),
            Model::Kanban(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Overflow(_) => "overflow",
            Model::Kanban(_) => "kanban",
        }
    }
}

#[cfg(test)]
mod tests;
