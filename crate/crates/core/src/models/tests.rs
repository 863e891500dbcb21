use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::tt::{TruncationPolicy, TtVector};

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

fn check_generator(a: &DMatrix<f64>, tol: f64) {
    for j in 0..a.ncols() {
        assert!(a.column(j).sum().abs() <= tol, "column {j} sums to {}", a.column(j).sum());
        for i in 0..a.nrows() {
            if i == j {
                assert!(a[(i, j)] <= 0.0);
            } else {
                assert!(a[(i, j)] >= 0.0);
            }
        }
    }
}

fn agree(model: &Model) {
    let a = model.operator().unwrap().assemble_dense().unwrap();
    let g = oracle_generator(model).unwrap().to_dense(usize::MAX).unwrap();
    assert_eq!(a.shape(), g.shape());
    assert!(max_abs(&(&a - &g)) <= 1e-13, "{model:?}: {}", max_abs(&(a - g)));
}

#[test]
fn single_birth_death_queue() {
    let a = build_overflow(&OverflowParams::uniform(1, 2, 1.0, 1.0)).unwrap().assemble_dense().unwrap();
    #[rustfmt::skip]
    let expect = DMatrix::from_row_slice(3, 3, &[
        -1.0, 1.0, 0.0,
        1.0, -2.0, 1.0,
        0.0, 1.0, -1.0,
    ]);
    assert_eq!(a, expect);
}

#[test]
fn overflow_pattern_is_nearest_neighbour() {
    let p = OverflowParams::standard(3, 8);
    let a = build_overflow(&p).unwrap().assemble_dense().unwrap();
    assert_eq!(a.nrows(), 729);
    let coords = |i: usize| [i / 81, (i / 9) % 9, i % 9];
    for i in 0..729 {
        for j in 0..729 {
            let (ci, cj) = (coords(i), coords(j));
            let dist: usize = ci.iter().zip(&cj).map(|(x, y)| x.abs_diff(*y)).sum();
            assert_eq!(a[(i, j)] != 0.0, dist <= 1, "entry ({i}, {j})");
        }
    }
    check_generator(&a, 1e-13);
}

#[test]
fn overflow_matches_oracle() {
    agree(&Model::Overflow(OverflowParams::uniform(2, 2, 1.0, 1.0)));
    agree(&Model::Overflow(OverflowParams::new(vec![2, 3, 1], vec![1.2, 0.7, 2.0], vec![1.0, 0.5, 1.5]).unwrap()));
    agree(&Model::Overflow(OverflowParams::standard(4, 3)));
}

#[test]
fn single_server_oracle() {
    let g = oracle_generator(&Model::Overflow(OverflowParams::uniform(1, 1, 0.3, 0.7))).unwrap();
    let d = g.to_dense(100).unwrap();
    assert_eq!(d, DMatrix::from_row_slice(2, 2, &[-0.3, 0.7, 0.3, -0.7]));
    let x = oracle_stationary(&d).unwrap();
    assert!((x[0] - 0.7).abs() < 1e-14 && (x[1] - 0.3).abs() < 1e-14);
}

#[test]
fn kanban_state_orders() {
    let s = |a, b, c| KanbanState::new(a, b, c);
    assert_eq!(
        enumerate_kanban_states(2, MachinePosition::Middle),
        vec![s(2, 0, 0), s(1, 1, 0), s(1, 0, 1), s(0, 2, 0), s(0, 1, 1), s(0, 0, 2)]
    );
    assert_eq!(enumerate_kanban_states(5, MachinePosition::Middle).len(), 21);
    assert_eq!(enumerate_kanban_states(1, MachinePosition::Middle), vec![s(1, 0, 0), s(0, 1, 0), s(0, 0, 1)]);
    assert_eq!(enumerate_kanban_states(2, MachinePosition::First), vec![s(0, 2, 0), s(0, 1, 1), s(0, 0, 2)]);
    assert_eq!(enumerate_kanban_states(2, MachinePosition::Last), vec![s(2, 0, 0), s(1, 1, 0), s(0, 2, 0)]);
    for k in 1..8 {
        assert_eq!(enumerate_kanban_states(k, MachinePosition::Middle).len(), (k + 1) * (k + 2) / 2);
        assert_eq!(enumerate_kanban_states(k, MachinePosition::First).len(), k + 1);
        assert_eq!(enumerate_kanban_states(k, MachinePosition::Last).len(), k + 1);
    }
}

#[test]
fn two_ticket_machine_factors() {
    let (mu, omega) = (1.5, 0.25);
    let f = kanban_factors(2, MachinePosition::Middle, mu, omega);
    #[rustfmt::skip]
    let local = DMatrix::from_row_slice(6, 6, &[
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, -mu, 0.0, 0.0, 0.0, 0.0,
        0.0, mu, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, -mu, 0.0, 0.0,
        0.0, 0.0, 0.0, mu, -mu, 0.0,
        0.0, 0.0, 0.0, 0.0, mu, 0.0,
    ]);
    #[rustfmt::skip]
    let previous = DMatrix::from_row_slice(6, 6, &[
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ]);
    #[rustfmt::skip]
    let next = DMatrix::from_row_slice(6, 6, &[
        0.0, 0.0, omega, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, omega, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, omega,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ]);
    assert_eq!(f.local, local);
    assert_eq!(f.from_previous, previous);
    assert_eq!(f.to_next, next);
}

#[test]
fn completion_keeps_conservative_local_terms() {
    let p = KanbanParams::standard(3, 2);
    let op = build_kanban(&p).unwrap();
    // Three local terms, two synchronized terms and their two compensators.
    assert_eq!(op.num_terms(), 7);
}

#[test]
fn kanban_sizes() {
    for (j, k) in [(3usize, 5usize), (2, 1), (4, 3), (6, 3)] {
        let p = KanbanParams::standard(j, k);
        let n: usize = p.dims().iter().product();
        assert_eq!(n, (k + 1).pow(2) * ((k + 1) * (k + 2) / 2).pow(j as u32 - 2));
    }
    assert_eq!(KanbanParams::standard(3, 5).dims().iter().product::<usize>(), 756);
}

#[test]
fn kanban_matches_oracle() {
    agree(&Model::Kanban(KanbanParams::standard(2, 1)));
    agree(&Model::Kanban(KanbanParams::standard(2, 2)));
    agree(&Model::Kanban(KanbanParams::new(3, 2, vec![1.0, 2.0, 0.5], vec![0.3, 0.7]).unwrap()));
    agree(&Model::Kanban(KanbanParams::standard(4, 2)));
    assert_eq!(oracle_generator(&Model::Kanban(KanbanParams::standard(2, 2))).unwrap().size, 9);
}

#[test]
fn oracle_instances_are_irreducible() {
    for m in [
        Model::Overflow(OverflowParams::standard(3, 4)),
        Model::Kanban(KanbanParams::standard(3, 3)),
        Model::Kanban(KanbanParams::standard(2, 5)),
    ] {
        let g = oracle_generator(&m).unwrap();
        assert!(check_irreducible(&g), "{m:?}");
        assert!(g.column_sums().iter().all(|s| s.abs() < 1e-13));
    }
    let limit = Model::Kanban(KanbanParams::standard(6, 5));
    assert!(matches!(oracle_generator(&limit), Err(crate::Error::SizeLimit { .. })));
}

#[test]
fn oracle_solution_residual() {
    let p = OverflowParams::new(vec![4, 4, 4], vec![1.3, 0.6, 0.9], vec![1.0, 1.4, 0.8]).unwrap();
    let a = oracle_generator(&Model::Overflow(p)).unwrap().to_dense(usize::MAX).unwrap();
    let x = oracle_stationary(&a).unwrap();
    assert!((&a * &x).norm() <= 1e-12 * a.norm());
    assert!((x.sum() - 1.0).abs() < 1e-14);
    assert!(x.iter().all(|&v| v >= 0.0));
}

#[test]
fn non_interacting_solution_is_product() {
    let p = OverflowParams::new(vec![3, 4], vec![1.2, 0.5], vec![1.0, 0.9]).unwrap();
    let a = build_overflow_non_interacting(&p).unwrap().assemble_dense().unwrap();
    let x = oracle_stationary(&a).unwrap();
    let v1 = birth_death_stationary(3, 1.2, 1.0);
    let v2 = birth_death_stationary(4, 0.5, 0.9);
    let expect = DVector::from_iterator(20, v1.iter().flat_map(|a| v2.iter().map(move |b| a * b)));
    assert!((x - expect).amax() < 1e-13);
}

#[test]
fn non_interacting_rank_one_residual() {
    let p = OverflowParams::standard(6, 8);
    let op = build_overflow_non_interacting(&p).unwrap();
    let factors: Vec<Vec<f64>> =
        (0..6).map(|i| birth_death_stationary(8, p.arrival_rates[i], p.service_rates[i])).collect();
    let x = TtVector::from_elementary(&factors).unwrap();
    let r = op.apply(&x, TruncationPolicy::exact(), 4).unwrap();
    assert!(r.norm() <= 1e-10, "{}", r.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_overflow_agrees_with_oracle(
        caps in proptest::collection::vec(1usize..4, 1..4),
        seed in 0u64..1000,
    ) {
        let j = caps.len();
        let rate = |i: usize, s: u64| 0.2 + ((seed * 31 + s * 7 + i as u64 * 13) % 17) as f64 / 8.0;
        let p = OverflowParams::new(caps, (0..j).map(|i| rate(i, 1)).collect(), (0..j).map(|i| rate(i, 2)).collect()).unwrap();
        let m = Model::Overflow(p);
        let a = m.operator().unwrap().assemble_dense().unwrap();
        let g = oracle_generator(&m).unwrap().to_dense(usize::MAX).unwrap();
        prop_assert!(max_abs(&(&a - &g)) <= 1e-13);
        check_generator(&a, 1e-13);
    }

    #[test]
    fn random_kanban_agrees_with_oracle(j in 2usize..4, k in 1usize..4, seed in 0u64..1000) {
        let rate = |i: usize, s: u64| 0.1 + ((seed * 29 + s * 11 + i as u64 * 5) % 13) as f64 / 6.0;
        let p = KanbanParams::new(j, k, (0..j).map(|i| rate(i, 1)).collect(), (0..j - 1).map(|i| rate(i, 2)).collect()).unwrap();
        let m = Model::Kanban(p);
        let a = m.operator().unwrap().assemble_dense().unwrap();
        let g = oracle_generator(&m).unwrap().to_dense(usize::MAX).unwrap();
        prop_assert!(max_abs(&(&a - &g)) <= 1e-13);
        check_generator(&a, 1e-13);
    }
}
