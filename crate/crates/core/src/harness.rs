//! The three front-end commands. Each returns an exit code and writes its
//! files only after the configuration has been accepted.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{Coupling, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::hierarchy::{build_hierarchy, GridHierarchy, HierarchySummary};
use crate::kron::KroneckerSumOperator;
use crate::models::{
    build_overflow_non_interacting, oracle_generator, oracle_stationary, Model, OverflowParams, ORACLE_DENSE_LIMIT,
};
use crate::solver::{MultigridSolver, SolveReport, CSV_SCHEMA_VERSION};
use crate::tt::{TruncationPolicy, TtMatrix, TtVector};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    ConfigError = 1,
    NotConverged = 2,
    ValidationFailed = 3,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

pub const GENERATOR_THRESHOLD: f64 = 1e-12;
pub const SOLUTION_THRESHOLD: f64 = 1e-5;

/// Finest-level operator with the coupling choice applied.
pub fn model_operator(cfg: &RunConfig) -> Result<(Model, KroneckerSumOperator)> {
    let model = cfg.model.model()?;
    let op = match (&model, cfg.model.coupling) {
        (Model::Overflow(p), Coupling::None) => build_overflow_non_interacting(p)?,
        _ => model.operator()?,
    };
    Ok((model, op))
}

pub fn hierarchy_for(cfg: &RunConfig, op: &KroneckerSumOperator) -> Result<GridHierarchy> {
    build_hierarchy(op, cfg.hierarchy.strategy(cfg.model.family), &cfg.hierarchy.options())
}

#[derive(Debug, Serialize)]
struct SolveOutput<'a> {
    seed: u64,
    model: &'a Model,
    hierarchy: HierarchySummary,
    report: &'a SolveReport,
}

/// Model, hierarchy and multigrid solve; progress goes to `log`.
pub fn run_solve(cfg: &RunConfig, log: &mut dyn std::io::Write) -> Result<(TtVector, SolveReport, GridHierarchy)> {
    let (_, op) = model_operator(cfg)?;
    let h = hierarchy_for(cfg, &op)?;
    let solver = MultigridSolver::new(&h, cfg.solver)?;
    let (x, report) = solver.solve_with(&mut |r| {
        let _ = writeln!(
            log,
            "cycle {:>3}  residual {:.3e}  cap {}  max_rank {}  eff_rank {:.1}",
            r.cycle, r.residual, r.rank_cap, r.max_rank, r.eff_rank
        );
    })?;
    Ok((x, report, h))
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, log: &mut dyn std::io::Write) -> Result<ExitCode> {
    let model = cfg.model.model()?;
    let (_, report, h) = run_solve(cfg, log)?;
    fs::create_dir_all(out)?;
    if cfg.output.formats.contains(&OutputFormat::Csv) {
        fs::write(out.join("report.csv"), report.to_csv())?;
    }
    if cfg.output.formats.contains(&OutputFormat::Json) {
        let doc = SolveOutput { seed: cfg.seed, model: &model, hierarchy: h.summary(), report: &report };
        fs::write(out.join("report.json"), serde_json::to_string_pretty(&doc).expect("serializes") + "\n")?;
    }
    let line = report.summary_line();
    fs::write(out.join("summary.txt"), format!("{line}\n"))?;
    let _ = writeln!(log, "{line}");
    Ok(if report.converged() { ExitCode::Success } else { ExitCode::NotConverged })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub state_count: usize,
    pub generator_deviation: f64,
    pub solution_deviation: f64,
    /// Largest `|1^T A_l|` entry over all levels.
    pub column_sum_deviation: f64,
    pub converged: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.generator_deviation <= GENERATOR_THRESHOLD && self.solution_deviation <= SOLUTION_THRESHOLD
    }
}

/// Dense assembly and multigrid solution against the enumeration oracles.
/// `None` when the model is too large for the dense oracle.
pub fn validate(cfg: &RunConfig) -> Result<Option<ValidationReport>> {
    let (model, op) = model_operator(cfg)?;
    let n = model.state_count();
    if n > oracle_max_states() {
        return Ok(None);
    }
    let oracle = match (&model, cfg.model.coupling) {
        (Model::Overflow(p), Coupling::None) => independent_queues_generator(p),
        _ => oracle_generator(&model)?.to_dense(usize::MAX)?,
    };
    let dense = op.assemble_dense()?;
    let generator_deviation = (&dense - &oracle).amax();
    let xs = oracle_stationary(&oracle)?;
    let h = hierarchy_for(cfg, &op)?;
    let (x, report) = MultigridSolver::new(&h, cfg.solver)?.solve()?;
    let xm = DVector::from_vec(x.to_full()?);
    let xm = &xm / xm.sum();
    let column_sum_deviation = h
        .levels
        .iter()
        .map(|l| max_column_sum(l.op.cols(), &l.op.assemble_triplets()))
        .fold(0.0, f64::max);
    Ok(Some(ValidationReport {
        state_count: n,
        generator_deviation,
        solution_deviation: (xm - xs).norm(),
        column_sum_deviation,
        converged: report.converged(),
    }))
}

/// Dense generator of independent birth-death queues built with plain
/// Kronecker products, mode 1 slowest.
fn independent_queues_generator(p: &OverflowParams) -> DMatrix<f64> {
    let dims = p.dims();
    let n: usize = dims.iter().product();
    let mut total = DMatrix::zeros(n, n);
    for (i, &d) in dims.iter().enumerate() {
        let (lambda, mu) = (p.arrival_rates[i], p.service_rates[i]);
        let mut q = DMatrix::from_fn(d, d, |r, c| if r == c + 1 { lambda } else if r + 1 == c { mu } else { 0.0 });
        for c in 0..d {
            let s: f64 = q.column(c).sum();
            q[(c, c)] = -s;
        }
        let mut term = DMatrix::identity(1, 1);
        for (m, &dm) in dims.iter().enumerate() {
            term = if m == i { term.kronecker(&q) } else { term.kronecker(&DMatrix::identity(dm, dm)) };
        }
        total += term;
    }
    total
}

/// Largest chain the dense oracles accept.
pub fn oracle_max_states() -> usize {
    (ORACLE_DENSE_LIMIT as f64).sqrt() as usize
}

fn max_column_sum(cols: usize, triplets: &[(usize, usize, f64)]) -> f64 {
    let mut sums = vec![0.0; cols];
    for &(_, c, v) in triplets {
        sums[c] += v;
    }
    sums.into_iter().map(f64::abs).fold(0.0, f64::max)
}

pub fn cmd_validate(cfg: &RunConfig, log: &mut dyn std::io::Write) -> Result<ExitCode> {
    let Some(r) = validate(cfg)? else {
        let n = cfg.model.model()?.state_count();
        let _ = writeln!(log, "model has {n} states, above the oracle limit of {}", oracle_max_states());
        return Ok(ExitCode::ValidationFailed);
    };
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    let _ = writeln!(log, "states               {}", r.state_count);
    let _ = writeln!(
        log,
        "generator deviation  {:.3e}  (<= {GENERATOR_THRESHOLD:e}) {}",
        r.generator_deviation,
        mark(r.generator_deviation <= GENERATOR_THRESHOLD)
    );
    let _ = writeln!(
        log,
        "solution deviation   {:.3e}  (<= {SOLUTION_THRESHOLD:e}) {}",
        r.solution_deviation,
        mark(r.solution_deviation <= SOLUTION_THRESHOLD)
    );
    let _ = writeln!(log, "column sums          {:.3e}", r.column_sum_deviation);
    Ok(if r.passed() { ExitCode::Success } else { ExitCode::ValidationFailed })
}

/// Where the reference solution of a rank study came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    DenseOracle,
    Multigrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankPoint {
    pub rank: usize,
    /// `||x - x_R||_2` for the reference `x` with `1^T x = 1`.
    pub error: f64,
    pub relative_error: f64,
    /// `||A x_R||` after renormalizing `x_R`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankStudy {
    pub source: ReferenceSource,
    pub reference_ranks: Vec<usize>,
    pub reference_residual: f64,
    pub points: Vec<RankPoint>,
}

impl RankStudy {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# ttmg rank study, schema {CSV_SCHEMA_VERSION}\n");
        out.push_str("rank,error,relative_error,residual\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{:.6e},{:.6e},{:.6e}", p.rank, p.error, p.relative_error, p.residual);
        }
        out
    }

    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].error <= w[0].error)
    }
}

/// Reference stationary vector: the dense oracle when the chain is small
/// enough, otherwise multigrid at `reference_tolerance`.
pub fn reference_solution(cfg: &RunConfig) -> Result<(TtVector, ReferenceSource, KroneckerSumOperator)> {
    let (model, op) = model_operator(cfg)?;
    let dims = model.dims();
    if model.state_count() <= cfg.rank_study.oracle_max_states {
        let xs = oracle_stationary(&op.assemble_dense()?)?;
        let x = TtVector::from_full(xs.as_slice(), &dims, TruncationPolicy::exact())?;
        return Ok((x, ReferenceSource::DenseOracle, op));
    }
    let h = hierarchy_for(cfg, &op)?;
    let mut solver_cfg = cfg.solver;
    solver_cfg.tolerance = cfg.rank_study.reference_tolerance;
    solver_cfg.final_recompression = false;
    solver_cfg.min_truncation = solver_cfg.min_truncation.min(1e-15);
    let (x, report) = MultigridSolver::new(&h, solver_cfg)?.solve()?;
    if !report.converged() {
        return Err(Error::Numerical(format!(
            "reference solve stopped at residual {:.3e} ({:?})",
            report.final_residual, report.termination
        )));
    }
    Ok((x, ReferenceSource::Multigrid, op))
}

/// Accuracy of rank-`R` truncations of `x` for `R = 1..=max_rank`.
pub fn rank_curve(x: &TtVector, a: &TtMatrix, max_rank: usize) -> Result<Vec<RankPoint>> {
    let x = x.round(TruncationPolicy::exact());
    let x = x.scale(1.0 / x.sum());
    let norm = x.norm();
    (1..=max_rank)
        .map(|rank| {
            let xr = x.round(TruncationPolicy::new(0.0, rank)?);
            let error = x.axpy(-1.0, &xr)?.norm();
            let s = xr.sum();
            let residual = if s != 0.0 { a.matvec_unrounded(&xr.scale(1.0 / s))?.norm() } else { f64::INFINITY };
            Ok(RankPoint { rank, error, relative_error: error / norm, residual })
        })
        .collect()
}

pub fn rank_study(cfg: &RunConfig) -> Result<RankStudy> {
    let (x, source, op) = reference_solution(cfg)?;
    let a = op.to_tt_matrix();
    let x = x.scale(1.0 / x.sum());
    let reference_residual = a.matvec_unrounded(&x)?.norm();
    let points = rank_curve(&x, &a, cfg.rank_study.max_rank)?;
    Ok(RankStudy { source, reference_ranks: x.ranks(), reference_residual, points })
}

pub fn cmd_rank_study(cfg: &RunConfig, out: &Path, log: &mut dyn std::io::Write) -> Result<ExitCode> {
    let study = rank_study(cfg)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("rank_study.csv"), study.to_csv())?;
    let _ = writeln!(
        log,
        "reference from {:?}, ranks {:?}, residual {:.3e}",
        study.source, study.reference_ranks, study.reference_residual
    );
    for p in &study.points {
        let _ = writeln!(log, "R={:>3}  error {:.3e}  residual {:.3e}", p.rank, p.error, p.residual);
    }
    Ok(ExitCode::Success)
}
