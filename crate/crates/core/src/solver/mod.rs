//! Rank-adaptive multigrid V-cycles on TT iterates.

mod report;
mod smoothers;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use report::{CycleRecord, SolveReport, Termination, CSV_SCHEMA_VERSION};
pub use smoothers::{
    gauss_seidel_smooth, gmres_smooth, inner_solve, residual, richardson_smooth, InnerReport, InnerSolverConfig,
    SmootherKind, TtOperator,
};

use crate::error::{invalid, Error, Result};
use crate::hierarchy::{CoarsestData, GridHierarchy};
use crate::kron::{KroneckerSumOperator, SweepOrder, TriangularSplit};
use crate::tt::{TruncationPolicy, TtVector};

/// Rounding tolerance of dense-to-TT conversions at the coarsest level.
pub const COARSE_CONVERSION_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorForm {
    /// Compressed TT-matrix cores.
    #[default]
    TtMatrix,
    /// Term-by-term application of the Kronecker sum.
    KroneckerSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub nu1: usize,
    pub nu2: usize,
    pub smoother: SmootherKind,
    /// Ordering that defines the Gauss-Seidel triangle.
    pub sweep_order: SweepOrder,
    pub initial_max_rank: usize,
    pub rank_growth: f64,
    /// Hard ceiling for the adaptive rank cap.
    pub rank_limit: usize,
    pub theta: f64,
    pub tolerance: f64,
    pub max_cycles: usize,
    pub inner: InnerSolverConfig,
    /// Truncation tolerance is this times `max(residual, tolerance)` over
    /// `||A||_est ||x||`.
    pub truncation_factor: f64,
    pub min_truncation: f64,
    pub max_truncation: f64,
    pub operator_form: OperatorForm,
    /// Try a final recompression that keeps the residual below tolerance.
    pub final_recompression: bool,
    /// Record wall time per cycle; disable for byte-identical reports.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nu1: 3,
            nu2: 3,
            smoother: SmootherKind::Gmres,
            sweep_order: SweepOrder::FirstModeMajor,
            initial_max_rank: 30,
            rank_growth: std::f64::consts::SQRT_2,
            rank_limit: 512,
            theta: 0.15,
            tolerance: 1e-7,
            max_cycles: 50,
            inner: InnerSolverConfig::default(),
            truncation_factor: 0.1,
            min_truncation: 1e-14,
            max_truncation: 1e-2,
            operator_form: OperatorForm::TtMatrix,
            final_recompression: true,
            record_time: true,
        }
    }
}

impl SolverConfig {
    /// One Gauss-Seidel sweep before and after the coarse correction, last
    /// mode most significant.
    pub fn gauss_seidel() -> Self {
        Self {
            nu1: 1,
            nu2: 1,
            smoother: SmootherKind::GaussSeidel,
            sweep_order: SweepOrder::LastModeMajor,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu1 + self.nu2 == 0 {
            return Err(invalid("at least one smoothing step is required"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(invalid("theta must lie in (0, 1)"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        if self.initial_max_rank == 0 || self.rank_limit < self.initial_max_rank {
            return Err(invalid("rank cap must be positive and below the rank limit"));
        }
        if !(self.rank_growth > 1.0) {
            return Err(invalid("rank growth factor must exceed 1"));
        }
        if !(self.inner.tolerance > 0.0) || self.inner.max_sweeps == 0 || self.inner.restart == 0 {
            return Err(invalid("inner solver settings must be positive"));
        }
        if !(self.min_truncation >= 0.0 && self.min_truncation <= self.max_truncation) {
            return Err(invalid("truncation bounds are inconsistent"));
        }
        Ok(())
    }
}

/// `A^+ r` through the precomputed pseudo-inverse.
pub fn coarsest_solve(coarsest: &CoarsestData, r: &DVector<f64>) -> DVector<f64> {
    &coarsest.pinv * r
}

/// Minimum-norm least-squares solution computed from scratch.
pub fn coarsest_solve_dense(a: &DMatrix<f64>, r: &DVector<f64>, rcond: f64) -> DVector<f64> {
    crate::linalg::pseudo_inverse(a, rcond) * r
}

struct LevelOps {
    a: Box<dyn TtOperator + Send + Sync>,
    /// `D - L` for Gauss-Seidel.
    m: Option<Box<dyn TtOperator + Send + Sync>>,
    norm_est: f64,
}

fn boxed(op: &KroneckerSumOperator, form: OperatorForm) -> Box<dyn TtOperator + Send + Sync> {
    match form {
        OperatorForm::TtMatrix => Box::new(op.to_tt_matrix()),
        OperatorForm::KroneckerSum => Box::new(op.clone()),
    }
}

/// Solver state bound to one hierarchy.
pub struct MultigridSolver<'h> {
    h: &'h GridHierarchy,
    cfg: SolverConfig,
    ops: Vec<LevelOps>,
}

impl<'h> MultigridSolver<'h> {
    pub fn new(h: &'h GridHierarchy, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let ops = h
            .levels
            .iter()
            .map(|lv| {
                let m = if cfg.smoother == SmootherKind::GaussSeidel {
                    Some(boxed(&TriangularSplit::with_order(&lv.op, cfg.sweep_order)?.lower_with_diagonal()?, cfg.operator_form))
                } else {
                    None
                };
                Ok(LevelOps { a: boxed(&lv.op, cfg.operator_form), m, norm_est: lv.op.norm_estimate() })
            })
            .collect::<Result<_>>()?;
        Ok(Self { h, cfg, ops })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn hierarchy(&self) -> &GridHierarchy {
        self.h
    }

    /// Fine-level operator in the configured form.
    pub fn operator(&self) -> &dyn TtOperator {
        self.ops[0].a.as_ref()
    }

    /// `||A x||` without any truncation.
    pub fn residual_norm(&self, x: &TtVector) -> Result<f64> {
        Ok(self.ops[0].a.apply_unrounded(x)?.norm())
    }

    fn smooth(&self, level: usize, b: Option<&TtVector>, x: TtVector, steps: usize, policy: TruncationPolicy) -> Result<TtVector> {
        if steps == 0 {
            return Ok(x);
        }
        let ops = &self.ops[level];
        match self.cfg.smoother {
            SmootherKind::Gmres => gmres_smooth(ops.a.as_ref(), b, &x, steps, policy),
            SmootherKind::Richardson => richardson_smooth(ops.a.as_ref(), b, &x, steps, 1.0 / ops.norm_est, policy),
            SmootherKind::GaussSeidel => {
                let m = ops.m.as_ref().expect("split prepared for Gauss-Seidel").as_ref();
                let mut x = x;
                for _ in 0..steps {
                    x = gauss_seidel_smooth(ops.a.as_ref(), m, b, &x, &self.cfg.inner, policy)?.0;
                }
                Ok(x)
            }
        }
    }

    fn coarsest_correction(&self, b: Option<&TtVector>, x: &TtVector, policy: TruncationPolicy) -> Result<TtVector> {
        let dims = x.dims();
        let xf = DVector::from_vec(x.to_full()?);
        let a = &self.h.coarsest.dense;
        let mut r = -(a * &xf);
        if let Some(b) = b {
            r += DVector::from_vec(b.to_full()?);
        }
        let e = coarsest_solve(&self.h.coarsest, &r);
        let conv = TruncationPolicy::new(COARSE_CONVERSION_TOLERANCE, policy.max_rank)?;
        let e = TtVector::from_full(e.as_slice(), &dims, conv)?;
        Ok(x.axpy(1.0, &e)?.round(conv))
    }

    /// One V-cycle for `A_l x = b` starting from `x`.
    pub fn vcycle(&self, level: usize, b: Option<&TtVector>, x: TtVector, policy: TruncationPolicy) -> Result<TtVector> {
        let levels = &self.h.levels;
        if level + 1 == levels.len() {
            return self.coarsest_correction(b, &x, policy);
        }
        let transfer = levels[level].transfer.as_ref().expect("non-coarsest level has a transfer");
        let x = self.smooth(level, b, x, self.cfg.nu1, policy)?;
        let r = residual(self.ops[level].a.as_ref(), b, &x, policy)?;
        let q: Vec<&DMatrix<f64>> = transfer.q.iter().collect();
        let bc = r.apply_kron(&q)?.round(policy);
        let zero = TtVector::zeros(&transfer.coarse_dims())?;
        let ec = self.vcycle(level + 1, Some(&bc), zero, policy)?;
        let p: Vec<&DMatrix<f64>> = transfer.p.iter().collect();
        let e = ec.apply_kron(&p)?;
        let x = x.axpy(1.0, &e)?.round(policy);
        self.smooth(level, b, x, self.cfg.nu2, policy)
    }

    /// Coarsest smallest singular vector, interpolated to the finest level
    /// and normalized to `1^T x = 1`.
    pub fn bootstrap_initial_guess(&self, policy: TruncationPolicy) -> Result<TtVector> {
        bootstrap_initial_guess(self.h, policy)
    }

    fn truncation(&self, res: f64, x: &TtVector) -> f64 {
        let denom = self.ops[0].norm_est * x.norm();
        let eps = self.cfg.truncation_factor * res.max(self.cfg.tolerance) / denom.max(f64::MIN_POSITIVE);
        eps.clamp(self.cfg.min_truncation, self.cfg.max_truncation)
    }

    /// V-cycles on `A x = 0` with normalization and rank adaptation.
    pub fn solve(&self) -> Result<(TtVector, SolveReport)> {
        self.solve_with(&mut |_| {})
    }

    /// As [`solve`](Self::solve), calling `on_cycle` after every record.
    pub fn solve_with(&self, on_cycle: &mut dyn FnMut(&CycleRecord)) -> Result<(TtVector, SolveReport)> {
        let start = Instant::now();
        let cfg = &self.cfg;
        let elapsed = || if cfg.record_time { start.elapsed().as_secs_f64() } else { 0.0 };
        let mut cap = cfg.initial_max_rank;
        let mut x = self.bootstrap_initial_guess(TruncationPolicy::new(COARSE_CONVERSION_TOLERANCE, cap)?)?;
        let mut res = self.residual_norm(&x)?;
        let mut report = SolveReport::new(self.h, cfg);
        report.push(CycleRecord::new(0, res, cap, &x, elapsed()));
        on_cycle(report.records.last().expect("just pushed"));
        let mut best = (res, x.clone());
        let mut termination = Termination::MaxCycles;
        if res < cfg.tolerance {
            termination = Termination::Converged;
        }
        let mut cycle = 0;
        while termination != Termination::Converged && cycle < cfg.max_cycles {
            cycle += 1;
            let policy = TruncationPolicy::new(self.truncation(res, &x), cap)?;
            x = self.vcycle(0, None, x, policy)?;
            let s = x.sum();
            if s == 0.0 || !s.is_finite() {
                return Err(Error::Numerical(format!("iterate lost its mass in cycle {cycle}")));
            }
            x.scale_in_place(1.0 / s);
            let new_res = self.residual_norm(&x)?;
            report.push(CycleRecord::new(cycle, new_res, cap, &x, elapsed()));
            on_cycle(report.records.last().expect("just pushed"));
            if new_res < best.0 {
                best = (new_res, x.clone());
            }
            if new_res < cfg.tolerance {
                termination = Termination::Converged;
                break;
            }
            if x.max_rank() >= cap && new_res / res > 1.0 - cfg.theta {
                if cap >= cfg.rank_limit {
                    termination = Termination::Stagnated;
                    break;
                }
                cap = ((cap as f64 * cfg.rank_growth).ceil() as usize).min(cfg.rank_limit);
                report.rank_increases.push(cycle);
            }
            res = new_res;
        }
        let (mut res, mut x) = if termination == Termination::Converged { (self.residual_norm(&x)?, x) } else { best };
        if termination == Termination::Converged && cfg.final_recompression {
            // Loosen the truncation tenfold at a time while the residual stays
            // below tolerance; keep the lowest-rank result.
            let mut eps = (cfg.truncation_factor * cfg.tolerance / (self.ops[0].norm_est * x.norm())).max(cfg.min_truncation);
            let base = x.clone();
            while eps <= cfg.max_truncation {
                let y = base.round(TruncationPolicy::new(eps, cap)?);
                let y = y.scale(1.0 / y.sum());
                let y_res = self.residual_norm(&y)?;
                if y_res >= cfg.tolerance {
                    break;
                }
                if y.max_rank() < x.max_rank() {
                    x = y;
                    res = y_res;
                }
                eps *= 10.0;
            }
        }
        report.finish(termination, res, &x, elapsed());
        Ok((x, report))
    }
}

pub fn bootstrap_initial_guess(h: &GridHierarchy, policy: TruncationPolicy) -> Result<TtVector> {
    let coarse = h.coarsest_level();
    let conv = TruncationPolicy::new(policy.rel_tolerance.max(COARSE_CONVERSION_TOLERANCE), policy.max_rank)?;
    let mut x = TtVector::from_full(h.coarsest.null_vector.as_slice(), coarse.dims(), conv)?;
    for level in h.levels.iter().rev().skip(1) {
        let transfer = level.transfer.as_ref().expect("non-coarsest level has a transfer");
        let p: Vec<&DMatrix<f64>> = transfer.p.iter().collect();
        x = x.apply_kron(&p)?.round(conv);
    }
    let s = x.sum();
    let fine = h.levels[0].dims().to_vec();
    if s.abs() <= 1e-14 * x.norm() * (x.full_len() as f64).sqrt() {
        let n = x.full_len() as f64;
        return Ok(TtVector::ones(&fine)?.scale(1.0 / n));
    }
    Ok(x.scale(1.0 / s))
}

/// Builds the solver and runs it.
pub fn solve_stationary(h: &GridHierarchy, cfg: &SolverConfig) -> Result<(TtVector, SolveReport)> {
    MultigridSolver::new(h, *cfg)?.solve()
}
