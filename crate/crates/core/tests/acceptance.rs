//! Acceptance suite. Each test checks one criterion at its stated tolerance
//! and prints a single PASS/FAIL line before asserting.
//!
//! Run with `cargo test -p ttmg --test acceptance -- --nocapture` to see the
//! lines; the two large solves take minutes in release mode.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ttmg::config::RunConfig;
use ttmg::harness::{hierarchy_for, model_operator, rank_study, validate};
use ttmg::kron::{Factor, KroneckerSumOperator, Term};
use ttmg::models::{build_kanban, build_overflow, oracle_generator, KanbanParams, Model, OverflowParams};
use ttmg::solver::{MultigridSolver, SolveReport};
use ttmg::tt::{Core, TruncationPolicy, TtVector};

fn verdict(name: &str, pass: bool, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::from_path(&path, &[]).unwrap()
}

fn solve(cfg: &RunConfig) -> (TtVector, SolveReport, usize) {
    let (_, op) = model_operator(cfg).unwrap();
    let h = hierarchy_for(cfg, &op).unwrap();
    let levels = h.num_levels();
    let (x, report) = MultigridSolver::new(&h, cfg.solver).unwrap().solve().unwrap();
    (x, report, levels)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

#[test]
fn generators_match_enumeration_oracle() {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for j in 1..=3 {
        for k in 1..=4 {
            let p = OverflowParams::standard(j, k);
            let a = build_overflow(&p).unwrap().assemble_dense().unwrap();
            let b = oracle_generator(&Model::Overflow(p)).unwrap().to_dense(usize::MAX).unwrap();
            worst = worst.max(max_abs(&(a - b)));
            cases += 1;
        }
    }
    for j in 2..=3 {
        for k in 1..=2 {
            let p = KanbanParams::standard(j, k);
            let a = build_kanban(&p).unwrap().assemble_dense().unwrap();
            let b = oracle_generator(&Model::Kanban(p)).unwrap().to_dense(usize::MAX).unwrap();
            worst = worst.max(max_abs(&(a - b)));
            cases += 1;
        }
    }
    verdict("generator oracle equivalence", worst <= 1e-13, &format!("{cases} models, max deviation {worst:.2e} (<= 1e-13)"));
}

fn oracle_cases() -> Vec<String> {
    let mut out = Vec::new();
    for (j, k) in [(1, 4), (2, 2), (2, 4), (3, 2), (3, 4)] {
        out.push(format!("[model]\nfamily = \"overflow\"\nj = {j}\nk = {k}\n[hierarchy]\ncoarsest_max = 4\n"));
    }
    out.push("[model]\nfamily = \"overflow\"\nj = 3\nk = [4, 2, 4]\narrival_rates = 0.7\nservice_rates = [1.0, 0.5, 2.0]\n[hierarchy]\ncoarsest_max = 4\n".into());
    for (j, k) in [(2, 3), (3, 3)] {
        out.push(format!("[model]\nfamily = \"kanban\"\nj = {j}\nk = {k}\n[hierarchy]\ncoarsest_max = 16\n"));
    }
    out
}

#[test]
fn solutions_match_dense_oracle() {
    let mut worst: f64 = 0.0;
    let mut all_converged = true;
    let cases = oracle_cases();
    for text in &cases {
        let cfg = RunConfig::from_toml(text, &[]).unwrap();
        let r = validate(&cfg).unwrap().expect("oracle-sized");
        worst = worst.max(r.solution_deviation);
        all_converged &= r.converged;
    }
    verdict(
        "solution oracle equivalence",
        worst <= 1e-5 && all_converged,
        &format!("{} models, max ||x_mg - x*|| {worst:.2e} (<= 1e-5), all converged: {all_converged}", cases.len()),
    );
}

#[test]
fn non_interacting_solution_has_rank_one() {
    let cfg = RunConfig::from_toml(
        "[model]\nfamily = \"overflow\"\nj = 4\nk = 8\ncoupling = \"none\"\narrival_rates = [1.2, 1.1, 1.0, 0.9]\nservice_rates = 1.0\n",
        &[],
    )
    .unwrap();
    let (x, report, _) = solve(&cfg);
    let pass = report.converged() && x.max_rank() == 1 && report.final_residual < 1e-7;
    verdict(
        "non-interacting rank one",
        pass,
        &format!("ranks {:?}, residual {:.2e} (< 1e-7), cycles {}", x.ranks(), report.final_residual, report.iterations()),
    );
}

#[test]
fn overflow_j6_k8_and_k16() {
    let (_, r8, levels8) = solve(&config("overflow_j6_k8.toml"));
    let pass8 = r8.converged() && r8.iterations() <= 15 && r8.final_rank_cap() <= 45 && levels8 == 4;
    verdict(
        "overflow J=6 k=8",
        pass8,
        &format!(
            "residual {:.2e} (< 1e-7), cycles {} (<= 15), rank cap {} (<= 45), levels {levels8} (= 4), max rank {}, eff rank {:.1}",
            r8.final_residual,
            r8.iterations(),
            r8.final_rank_cap(),
            r8.final_max_rank,
            r8.final_eff_rank
        ),
    );
    let (_, r16, levels16) = solve(&config("overflow_j6_k16.toml"));
    let pass16 = r16.converged() && levels16 == 5 && r16.iterations() <= 2 * r8.iterations();
    verdict(
        "overflow k=16 scaling",
        pass16,
        &format!(
            "residual {:.2e}, cycles {} vs {} for k=8 (<= 2x), levels {levels16} (= 5)",
            r16.final_residual,
            r16.iterations(),
            r8.iterations()
        ),
    );
}

#[test]
fn kanban_j6_k3() {
    let (_, r, levels) = solve(&config("kanban_j6_k3.toml"));
    let pass = r.converged() && r.iterations() <= 25 && levels == 3;
    verdict(
        "kanban J=6 k=3",
        pass,
        &format!(
            "residual {:.2e} (< 1e-7), cycles {} (<= 25), levels {levels} (= 3), max rank {}, eff rank {:.1}",
            r.final_residual,
            r.iterations(),
            r.final_max_rank,
            r.final_eff_rank
        ),
    );
}

#[test]
fn rank_accuracy_curves() {
    let a = rank_study(&config("rank_study_a.toml")).unwrap();
    let c = rank_study(&config("rank_study_c.toml")).unwrap();
    let ordered = a.points.iter().zip(&c.points).all(|(pa, pc)| pc.error >= pa.error);
    let monotone = a.is_monotone() && c.is_monotone();
    let pairs: Vec<String> = a.points.iter().zip(&c.points).map(|(pa, pc)| format!("{:.1e}/{:.1e}", pa.error, pc.error)).collect();
    verdict(
        "rank-accuracy curves",
        ordered && monotone && a.points.len() == 10,
        &format!("err(c) >= err(a) for R <= 10: {ordered}, monotone: {monotone}; a/c by rank {}", pairs.join(" ")),
    );
}

fn random_tt(rng: &mut ChaCha8Rng, dims: &[usize], max_rank: usize) -> TtVector {
    let j = dims.len();
    let ranks: Vec<usize> = (0..=j).map(|k| if k == 0 || k == j { 1 } else { rng.gen_range(1..=max_rank) }).collect();
    let cores = (0..j)
        .map(|k| {
            let len = ranks[k] * dims[k] * ranks[k + 1];
            Core::from_vec(ranks[k], dims[k], ranks[k + 1], (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        })
        .collect();
    TtVector::from_cores(cores).unwrap()
}

fn random_operator(rng: &mut ChaCha8Rng, dims: &[usize], terms: usize) -> (KroneckerSumOperator, DMatrix<f64>) {
    let n: usize = dims.iter().product();
    let mut dense = DMatrix::zeros(n, n);
    let mut out = Vec::new();
    for _ in 0..terms {
        let mats: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let c = rng.gen_range(0.5..2.0);
        // Row-major Kronecker product, built entry by entry.
        dense += DMatrix::from_fn(n, n, |r, col| {
            let (mut r, mut col, mut v) = (r, col, c);
            for (m, &d) in mats.iter().zip(dims).rev() {
                v *= m[(r % d, col % d)];
                r /= d;
                col /= d;
            }
            v
        });
        out.push(Term::new(c, mats.into_iter().map(Factor::from_dense).collect()));
    }
    (KroneckerSumOperator::new(out).unwrap(), dense)
}

#[test]
fn tt_algebra_properties() {
    const INSTANCES: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures: Vec<String> = Vec::new();
    let mut worst_round: f64 = 0.0;
    for i in 0..INSTANCES {
        let order = rng.gen_range(2..=4);
        let dims: Vec<usize> = (0..order).map(|_| rng.gen_range(2..=4)).collect();
        let x = random_tt(&mut rng, &dims, 3);
        let y = random_tt(&mut rng, &dims, 3);
        let xf = DVector::from_vec(x.to_full().unwrap());
        let yf = DVector::from_vec(y.to_full().unwrap());

        let eps = rng.gen_range(1e-3..0.5);
        let xr = x.round(TruncationPolicy::with_tolerance(eps));
        let err = (DVector::from_vec(xr.to_full().unwrap()) - &xf).norm();
        worst_round = worst_round.max(err / (eps * xf.norm()));
        if err > eps * xf.norm() * (1.0 + 1e-10) {
            failures.push(format!("round #{i}"));
        }

        let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let s = x.scale(alpha).add(&y.scale(beta)).unwrap();
        let sf = DVector::from_vec(s.to_full().unwrap());
        let add_ok = (sf - (&xf * alpha + &yf * beta)).norm() <= 1e-12 * (1.0 + xf.norm() + yf.norm())
            && s.ranks().iter().zip(x.ranks().iter().zip(y.ranks())).enumerate().all(|(k, (&rs, (&rx, ry)))| {
                if k == 0 || k == order { rs == 1 } else { rs == rx + ry }
            });
        if !add_ok {
            failures.push(format!("add #{i}"));
        }

        let dot_ok = (x.dot(&y).unwrap() - xf.dot(&yf)).abs() <= 1e-12 * (1.0 + xf.norm() * yf.norm());
        if !dot_ok {
            failures.push(format!("dot #{i}"));
        }

        let terms = rng.gen_range(1..=3);
        let (op, dense) = random_operator(&mut rng, &dims, terms);
        let a = op.to_tt_matrix();
        let ax = a.matvec_unrounded(&x).unwrap();
        let mv_ok = (DVector::from_vec(ax.to_full().unwrap()) - &dense * &xf).norm() <= 1e-11 * (1.0 + dense.norm() * xf.norm())
            && ax.ranks().iter().zip(a.ranks().iter().zip(x.ranks())).all(|(&r, (&ra, rx))| r <= ra * rx);
        if !mv_ok {
            failures.push(format!("matvec #{i}"));
        }
        let via_terms = op.apply(&x, TruncationPolicy::exact(), 2).unwrap();
        if (DVector::from_vec(via_terms.to_full().unwrap()) - &dense * &xf).norm() > 1e-11 * (1.0 + dense.norm() * xf.norm()) {
            failures.push(format!("term apply #{i}"));
        }
    }
    verdict(
        "TT algebra properties",
        failures.is_empty(),
        &format!(
            "{INSTANCES} instances each of round/add/dot/matvec/term apply, worst rounding error ratio {worst_round:.3} (<= 1), failures {failures:?}"
        ),
    );
}

/// Column sums of a Kronecker sum: each term contributes the Kronecker
/// product of its factors' column sums.
fn column_sums(op: &KroneckerSumOperator) -> Vec<f64> {
    let mut total = vec![0.0; op.cols()];
    for term in op.terms() {
        let v = term.factors.iter().fold(vec![term.coeff], |acc, f| {
            let s = f.column_sums();
            acc.iter().flat_map(|&a| s.iter().map(move |&b| a * b)).collect()
        });
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
    }
    total
}

#[test]
fn column_sums_vanish_on_every_level() {
    let mut worst: f64 = 0.0;
    let mut levels = 0;
    let cfgs: Vec<RunConfig> = oracle_cases().iter().map(|t| RunConfig::from_toml(t, &[]).unwrap()).collect();
    for cfg in &cfgs {
        let (_, op) = model_operator(cfg).unwrap();
        let h = hierarchy_for(cfg, &op).unwrap();
        for l in &h.levels {
            let sums = column_sums(&l.op);
            if l.size() <= 4096 {
                let dense = l.op.assemble_dense().unwrap();
                // Dense summation only agrees up to roundoff on the column's magnitude.
                for (j, s) in sums.iter().enumerate() {
                    let scale: f64 = dense.column(j).iter().map(|v| v.abs()).sum();
                    assert!((dense.column(j).sum() - s).abs() <= 1e-14 * scale.max(1.0), "column {j}");
                }
            }
            worst = sums.iter().fold(worst, |w, s| w.max(s.abs()));
            levels += 1;
        }
    }
    verdict(
        "structure preservation",
        worst <= 1e-12,
        &format!("{} hierarchies, {levels} levels, max |1^T A_l| {worst:.2e} (<= 1e-12)", cfgs.len()),
    );
}
