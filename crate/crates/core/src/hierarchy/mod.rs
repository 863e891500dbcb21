//! Coarse spaces per factor and the Petrov-Galerkin level hierarchy.

mod kanban;
mod transfer;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use kanban::{final_kanban_aggregation, triangle_aggregation};
pub use transfer::{aggregation_operators, direct_interpolation, full_coarsen_chain, linear_transfer, TransferPair};

use crate::error::{invalid, Error, Result};
use crate::kron::KroneckerSumOperator;
use crate::linalg::{pseudo_inverse, smallest_right_singular_vector};
use crate::models::MachinePosition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    #[default]
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Full coarsening of every chain-structured factor.
    Overflow { interpolation: Interpolation },
    /// Triangle aggregation of Kanban machine factors.
    Kanban,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyOptions {
    /// Stop coarsening once the global size is at most this.
    pub coarsest_max: usize,
    /// Largest coarsest level that may be factored densely.
    pub coarsest_dense_limit: usize,
    /// Relative singular value cutoff of the coarsest pseudo-inverse.
    pub pinv_rcond: f64,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        Self { coarsest_max: 64, coarsest_dense_limit: 4096, pinv_rcond: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct Level {
    pub op: KroneckerSumOperator,
    /// Transfer to the next coarser level; `None` on the coarsest.
    pub transfer: Option<TransferPair>,
}

impl Level {
    pub fn dims(&self) -> &[usize] {
        self.op.col_dims()
    }

    pub fn size(&self) -> usize {
        self.op.cols()
    }
}

/// Dense data of the coarsest level.
#[derive(Debug, Clone)]
pub struct CoarsestData {
    pub dense: DMatrix<f64>,
    pub pinv: DMatrix<f64>,
    /// Right singular vector of the smallest singular value.
    pub null_vector: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct GridHierarchy {
    pub levels: Vec<Level>,
    pub coarsest: CoarsestData,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub dims: Vec<usize>,
    pub size: usize,
    pub terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySummary {
    pub strategy: Strategy,
    pub levels: Vec<LevelSummary>,
    pub coarsest_size: usize,
}

impl GridHierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &KroneckerSumOperator {
        &self.levels[0].op
    }

    pub fn coarsest_level(&self) -> &Level {
        self.levels.last().expect("hierarchy has a level")
    }

    pub fn summary(&self) -> HierarchySummary {
        HierarchySummary {
            strategy: self.strategy,
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(l, lv)| LevelSummary { level: l, dims: lv.dims().to_vec(), size: lv.size(), terms: lv.op.num_terms() })
                .collect(),
            coarsest_size: self.coarsest_level().size(),
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }
}

/// Per-mode coarsening state carried between levels.
enum ModeState {
    Chain { local: DMatrix<f64> },
    Machine { position: MachinePosition, tickets: Option<usize> },
}

fn chain_step(n: usize, local: &DMatrix<f64>, interpolation: Interpolation) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
    if n <= 2 {
        return Ok(None);
    }
    let coarse = full_coarsen_chain(n)?;
    // Restriction is linear for both, so 1^T Q = 1^T.
    let (linear, q) = linear_transfer(n)?;
    let p = match interpolation {
        Interpolation::Linear => linear,
        Interpolation::Direct => direct_interpolation(local, &coarse)?,
    };
    Ok(Some((p, q)))
}

fn machine_step(position: MachinePosition, tickets: usize) -> Result<(Vec<usize>, Option<usize>)> {
    if tickets == 2 {
        let size = match position {
            MachinePosition::Middle => 6,
            _ => 3,
        };
        Ok((final_kanban_aggregation(size, position)?, None))
    } else {
        Ok((triangle_aggregation(tickets, position)?, Some(tickets.div_ceil(2))))
    }
}

fn initial_modes(a: &KroneckerSumOperator, strategy: Strategy) -> Result<Vec<ModeState>> {
    let dims = a.col_dims();
    match strategy {
        Strategy::Overflow { .. } => {
            let mut modes = Vec::with_capacity(dims.len());
            for j in 0..dims.len() {
                let mut n = dims[j];
                // The whole schedule must stay on odd chains down to size 2.
                while n > 2 {
                    full_coarsen_chain(n)?;
                    n = n.div_ceil(2);
                }
                let local = a.local_matrix(j)?.map_or_else(|| a.aux_local_matrix(j), Ok)?;
                modes.push(ModeState::Chain { local });
            }
            Ok(modes)
        }
        Strategy::Kanban => {
            let j = dims.len();
            if j < 2 {
                return Err(invalid("Kanban hierarchy needs at least two machines"));
            }
            let k = dims[0] - 1;
            for (m, &n) in dims.iter().enumerate() {
                let expect = if m == 0 || m + 1 == j { k + 1 } else { (k + 1) * (k + 2) / 2 };
                if n != expect {
                    return Err(invalid(format!("mode {m} has {n} states, expected {expect} for {k} tickets")));
                }
            }
            let tickets = match k {
                1 => None,
                2 => Some(2),
                _ if (k - 1).is_power_of_two() => Some(k),
                _ => return Err(invalid(format!("Kanban aggregation needs k = 2^m + 1 tickets, got {k}"))),
            };
            Ok((0..j)
                .map(|m| {
                    let position = if m == 0 {
                        MachinePosition::First
                    } else if m + 1 == j {
                        MachinePosition::Last
                    } else {
                        MachinePosition::Middle
                    };
                    ModeState::Machine { position, tickets }
                })
                .collect())
        }
    }
}

/// One transfer per mode, or `None` when no mode can be coarsened further.
fn next_transfer(dims: &[usize], modes: &mut [ModeState], strategy: Strategy) -> Result<Option<TransferPair>> {
    let mut p = Vec::with_capacity(dims.len());
    let mut q = Vec::with_capacity(dims.len());
    let mut any = false;
    for (&n, mode) in dims.iter().zip(modes.iter_mut()) {
        let step = match mode {
            ModeState::Chain { local } => {
                let interpolation = match strategy {
                    Strategy::Overflow { interpolation } => interpolation,
                    Strategy::Kanban => Interpolation::Linear,
                };
                let step = chain_step(n, local, interpolation)?;
                if let Some((pj, qj)) = &step {
                    *local = qj * &*local * pj;
                }
                step
            }
            ModeState::Machine { position, tickets } => match *tickets {
                None => None,
                Some(k) => {
                    let (map, next) = machine_step(*position, k)?;
                    *tickets = next;
                    Some(aggregation_operators(&map)?)
                }
            },
        };
        match step {
            Some((pj, qj)) => {
                any = true;
                p.push(pj);
                q.push(qj);
            }
            None => {
                p.push(DMatrix::identity(n, n));
                q.push(DMatrix::identity(n, n));
            }
        }
    }
    Ok(any.then_some(TransferPair { p, q }))
}

/// Coarsens until the global size is at most `coarsest_max` or no factor
/// can be coarsened, then factors the coarsest operator densely.
pub fn build_hierarchy(a: &KroneckerSumOperator, strategy: Strategy, options: &HierarchyOptions) -> Result<GridHierarchy> {
    let levels = coarsen(a, strategy, options.coarsest_max)?;
    let last = levels.last().expect("nonempty");
    if last.size() > options.coarsest_dense_limit {
        return Err(Error::Config(format!(
            "coarsest level has {} states, above the dense limit {}",
            last.size(),
            options.coarsest_dense_limit
        )));
    }
    let dense = last.op.assemble_dense_limited(usize::MAX)?;
    let pinv = pseudo_inverse(&dense, options.pinv_rcond);
    let null_vector = smallest_right_singular_vector(&dense)?;
    Ok(GridHierarchy { levels, coarsest: CoarsestData { dense, pinv, null_vector }, strategy })
}

/// The level operators and transfers alone, without the dense coarsest data.
pub fn coarsen(a: &KroneckerSumOperator, strategy: Strategy, coarsest_max: usize) -> Result<Vec<Level>> {
    if !a.is_square() {
        return Err(invalid("hierarchy needs a square operator"));
    }
    let mut modes = initial_modes(a, strategy)?;
    let mut levels = vec![Level { op: a.clone(), transfer: None }];
    loop {
        let current = levels.last().expect("nonempty");
        if current.size() <= coarsest_max {
            break;
        }
        let dims = current.dims().to_vec();
        let Some(transfer) = next_transfer(&dims, &mut modes, strategy)? else {
            break;
        };
        let coarse = current.op.petrov_galerkin(&transfer.p, &transfer.q)?.simplified();
        levels.last_mut().expect("nonempty").transfer = Some(transfer);
        levels.push(Level { op: coarse, transfer: None });
    }
    Ok(levels)
}
