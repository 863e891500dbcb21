use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SolverConfig;
use crate::hierarchy::GridHierarchy;
use crate::tt::TtVector;

pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxCycles,
    Stagnated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub residual: f64,
    pub rank_cap: usize,
    pub max_rank: usize,
    pub eff_rank: f64,
    pub elapsed_seconds: f64,
}

impl CycleRecord {
    pub fn new(cycle: usize, residual: f64, rank_cap: usize, x: &TtVector, elapsed_seconds: f64) -> Self {
        Self { cycle, residual, rank_cap, max_rank: x.max_rank(), eff_rank: x.effective_rank(), elapsed_seconds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub state_count: u128,
    pub levels: usize,
    pub dims: Vec<usize>,
    pub config: SolverConfig,
    /// Record 0 is the initial guess.
    pub records: Vec<CycleRecord>,
    /// Cycles after which the rank cap grew.
    pub rank_increases: Vec<usize>,
    pub termination: Termination,
    pub final_residual: f64,
    pub final_ranks: Vec<usize>,
    pub final_max_rank: usize,
    pub final_eff_rank: f64,
    pub elapsed_seconds: f64,
}

impl SolveReport {
    pub(super) fn new(h: &GridHierarchy, config: &SolverConfig) -> Self {
        let dims = h.levels[0].dims().to_vec();
        Self {
            state_count: dims.iter().map(|&n| n as u128).product(),
            levels: h.num_levels(),
            dims,
            config: *config,
            records: Vec::new(),
            rank_increases: Vec::new(),
            termination: Termination::MaxCycles,
            final_residual: f64::NAN,
            final_ranks: Vec::new(),
            final_max_rank: 0,
            final_eff_rank: 0.0,
            elapsed_seconds: 0.0,
        }
    }

    pub(super) fn push(&mut self, record: CycleRecord) {
        self.records.push(record);
    }

    pub(super) fn finish(&mut self, termination: Termination, residual: f64, x: &TtVector, elapsed: f64) {
        self.termination = termination;
        self.final_residual = residual;
        self.final_ranks = x.ranks();
        self.final_max_rank = x.max_rank();
        self.final_eff_rank = x.effective_rank();
        self.elapsed_seconds = elapsed;
    }

    /// Number of V-cycles performed.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.cycle)
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn final_rank_cap(&self) -> usize {
        self.records.last().map_or(0, |r| r.rank_cap)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-cycle history. Wall time is left out so that reruns are
    /// byte-identical.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# ttmg solve report, schema {CSV_SCHEMA_VERSION}\n");
        out.push_str("cycle,residual,rank_cap,max_rank,eff_rank\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:.6e},{},{},{:.4}", r.cycle, r.residual, r.rank_cap, r.max_rank, r.eff_rank);
        }
        out
    }

    /// One table row: n, levels, iterations, max rank, effective rank, time.
    pub fn summary_line(&self) -> String {
        format!(
            "n={} levels={} iter={} max_rank={} eff_rank={:.1} time={:.1} termination={}",
            self.state_count,
            self.levels,
            self.iterations(),
            self.final_max_rank,
            self.final_eff_rank,
            self.elapsed_seconds,
            match self.termination {
                Termination::Converged => "converged",
                Termination::MaxCycles => "max_cycles",
                Termination::Stagnated => "stagnated",
            }
        )
    }
}
