//! Dense-oracle checks for the TT algebra. The oracles here (explicit
//! Kronecker products, dense sums, brute-force rank-one fits) never call
//! into the TT code paths they validate.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn kron_vec(factors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for &a in &out {
            for &b in f {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

fn kron_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |i, j| {
        a[(i / b.nrows(), j / b.ncols())] * b[(i % b.nrows(), j % b.ncols())]
    })
}

fn dense_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dense_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub(crate) fn random_tt(rng: &mut ChaCha8Rng, dims: &[usize], max_rank: usize) -> TtVector {
    let j = dims.len();
    let mut ranks = vec![1usize; j + 1];
    for r in ranks.iter_mut().take(j).skip(1) {
        *r = rng.gen_range(1..=max_rank);
    }
    let cores = (0..j)
        .map(|k| {
            let len = ranks[k] * dims[k] * ranks[k + 1];
            let data = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Core::from_vec(ranks[k], dims[k], ranks[k + 1], data)
        })
        .collect();
    TtVector::from_cores(cores).unwrap()
}

fn random_dims(rng: &mut ChaCha8Rng, order: usize, max_n: usize) -> Vec<usize> {
    (0..order).map(|_| rng.gen_range(1..=max_n)).collect()
}

#[test]
fn elementary_tensors_follow_kronecker_order() {
    let x = TtVector::from_elementary(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    assert_eq!(x.to_full().unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    let y = TtVector::from_elementary(&[vec![1.0, 1.0], vec![2.0, 0.0, 0.0]]).unwrap();
    assert_eq!(y.to_full().unwrap(), vec![2.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
    let z = TtVector::from_elementary(&[vec![3.0, 4.0]]).unwrap();
    assert_eq!(z.ranks(), vec![1, 1]);
    assert_eq!(z.to_full().unwrap(), vec![3.0, 4.0]);
    let w = TtVector::from_elementary(&[vec![1.0, 2.0], vec![1.0, 0.0]]).unwrap();
    assert_eq!(w.to_full().unwrap(), vec![1.0, 0.0, 2.0, 0.0]);
    assert!(TtVector::from_elementary(&[]).is_err());
    assert!(TtVector::from_elementary(&[vec![]]).is_err());
}

#[test]
fn from_cores_checks_rank_chain() {
    let a = Core::zeros(1, 2, 2);
    let b = Core::zeros(3, 2, 1);
    assert!(TtVector::from_cores(vec![a.clone(), b]).is_err());
    assert!(TtVector::from_cores(vec![Core::zeros(2, 2, 1)]).is_err());
    assert!(TtVector::from_cores(vec![a, Core::zeros(2, 2, 1)]).is_ok());
}

#[test]
fn to_full_respects_size_limit() {
    let x = TtVector::ones(&[10, 10, 10]).unwrap();
    assert!(matches!(x.to_full_limited(999), Err(crate::Error::SizeLimit { .. })));
    assert_eq!(x.to_full_limited(1000).unwrap().len(), 1000);
}

#[test]
fn full_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v: Vec<f64> = (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = TtVector::from_full(&v, &[3, 4, 5], TruncationPolicy::exact()).unwrap();
    let back = x.to_full().unwrap();
    for (a, b) in v.iter().zip(&back) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn from_full_finds_low_ranks() {
    let e = TtVector::from_full(&kron_vec(&[vec![1.0, 2.0], vec![3.0, -1.0, 0.5], vec![2.0, 2.0]]), &[2, 3, 2], TruncationPolicy::exact()).unwrap();
    assert_eq!(e.ranks(), vec![1, 1, 1, 1]);

    let a = kron_vec(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0]]);
    let b = kron_vec(&[vec![0.0, 1.0, -1.0], vec![3.0, 0.0, 1.0]]);
    let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let t = TtVector::from_full(&s, &[3, 3], TruncationPolicy::exact()).unwrap();
    assert!(t.ranks()[1] <= 2);
    assert!(dense_diff(&t.to_full().unwrap(), &s) < 1e-12);
}

/// Brute-force best rank-one error over products of unit vectors in R^2,
/// parametrized by angles, with a grid search followed by local refinement.
fn brute_force_rank_one_error(v: &[f64], order: usize) -> f64 {
    let eval = |angles: &[f64]| -> f64 {
        let factors: Vec<Vec<f64>> = angles.iter().map(|t| vec![t.cos(), t.sin()]).collect();
        let u = kron_vec(&factors);
        let ip: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        (v.iter().map(|x| x * x).sum::<f64>() - ip * ip).max(0.0).sqrt()
    };
    let steps = if order <= 3 { 90 } else { 36 };
    let h = std::f64::consts::PI / steps as f64;
    let mut best = f64::INFINITY;
    let mut best_angles = vec![0.0; order];
    let mut idx = vec![0usize; order];
    loop {
        let angles: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
        let e = eval(&angles);
        if e < best {
            best = e;
            best_angles = angles;
        }
        let mut k = 0;
        while k < order {
            idx[k] += 1;
            if idx[k] < steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == order {
            break;
        }
    }
    // Coordinate refinement around the best grid point.
    let mut step = h;
    while step > 1e-10 {
        let mut improved = false;
        for k in 0..order {
            for dir in [-1.0, 1.0] {
                let mut trial = best_angles.clone();
                trial[k] += dir * step;
                let e = eval(&trial);
                if e < best {
                    best = e;
                    best_angles = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

#[test]
fn rank_one_tt_svd_is_quasi_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = TtVector::from_full(&v, &[2, 2, 2], TruncationPolicy::with_max_rank(1)).unwrap();
    assert_eq!(x.max_rank(), 1);
    let err = dense_diff(&x.to_full().unwrap(), &v);
    let best = brute_force_rank_one_error(&v, 3);
    assert!(err >= best - 1e-9, "err {err} best {best}");
    assert!(err <= 2f64.sqrt() * best + 1e-9, "err {err} best {best}");
}

#[test]
fn rounding_to_rank_one_is_within_factor_two_of_best() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = TtVector::from_full(&v, &[2, 2, 2, 2], TruncationPolicy::exact()).unwrap();
    let r = x.round(TruncationPolicy::with_max_rank(1));
    assert_eq!(r.max_rank(), 1);
    let err = dense_diff(&r.to_full().unwrap(), &v);
    let best = brute_force_rank_one_error(&v, 4);
    assert!(err >= best - 1e-9);
    assert!(err <= 2.0 * best + 1e-9, "err {err} best {best}");
}

#[test]
fn add_concatenates_ranks() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_tt(&mut rng, &[2, 3, 2], 2);
    let zero = TtVector::zeros(&[2, 3, 2]).unwrap();
    let s = x.add(&zero).unwrap();
    let rx = x.ranks();
    assert_eq!(s.ranks(), vec![1, rx[1] + 1, rx[2] + 1, 1]);
    assert!(dense_diff(&s.to_full().unwrap(), &x.to_full().unwrap()) < 1e-14);

    let a = TtVector::from_cores(vec![
        Core::from_vec(1, 2, 2, vec![1.0; 4]),
        Core::from_vec(2, 2, 2, vec![1.0; 8]),
        Core::from_vec(2, 2, 1, vec![1.0; 4]),
    ])
    .unwrap();
    let b = TtVector::from_cores(vec![
        Core::from_vec(1, 2, 3, vec![1.0; 6]),
        Core::from_vec(3, 2, 3, vec![1.0; 18]),
        Core::from_vec(3, 2, 1, vec![1.0; 6]),
    ])
    .unwrap();
    assert_eq!(a.add(&b).unwrap().ranks(), vec![1, 5, 5, 1]);

    let y = random_tt(&mut rng, &[2, 3, 2], 3);
    let dense: Vec<f64> = x.to_full().unwrap().iter().zip(y.to_full().unwrap()).map(|(a, b)| a + b).collect();
    assert!(dense_diff(&x.add(&y).unwrap().to_full().unwrap(), &dense) < 1e-12);
    assert!(x.add(&TtVector::zeros(&[2, 3, 3]).unwrap()).is_err());
}

#[test]
fn scale_touches_one_core() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_tt(&mut rng, &[2, 2, 3], 2);
    let full = x.to_full().unwrap();
    assert_eq!(x.scale(1.0), x);
    let z = x.scale(0.0);
    assert_eq!(z.ranks(), x.ranks());
    assert!(z.to_full().unwrap().iter().all(|&v| v == 0.0));
    let s = x.scale(-2.5).to_full().unwrap();
    for (a, b) in s.iter().zip(&full) {
        assert!((a + 2.5 * b).abs() <= 1e-13);
    }
}

#[test]
fn dot_and_norm_match_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_tt(&mut rng, &[3, 2, 4], 3);
    let y = random_tt(&mut rng, &[3, 2, 4], 2);
    let (fx, fy) = (x.to_full().unwrap(), y.to_full().unwrap());
    let dense: f64 = fx.iter().zip(&fy).map(|(a, b)| a * b).sum();
    assert!((x.dot(&y).unwrap() - dense).abs() <= 1e-12 * dense.abs().max(1.0));
    assert!(x.dot(&x).unwrap() >= 0.0);

    let e1 = TtVector::from_elementary(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let e2 = TtVector::from_elementary(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(e1.dot(&e2).unwrap(), 0.0);
    assert!(e1.dot(&random_tt(&mut rng, &[2, 3], 1)).is_err());

    assert_eq!(TtVector::zeros(&[3, 3]).unwrap().norm(), 0.0);
    assert!((e1.norm() - 1.0).abs() < 1e-15);
    let z = random_tt(&mut rng, &[4, 4, 4], 3);
    let dn = dense_norm(&z.to_full().unwrap());
    assert!((z.norm() - dn).abs() <= 1e-12 * dn);
}

#[test]
fn rounding_removes_redundant_ranks() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = random_tt(&mut rng, &[3, 3, 3, 3], 2);
    let doubled = x.add(&x).unwrap().scale(0.5);
    let r = doubled.round(TruncationPolicy::with_tolerance(1e-14));
    assert_eq!(r.ranks(), x.round(TruncationPolicy::exact()).ranks());
    assert!(r.ranks().iter().zip(x.ranks()).all(|(a, b)| *a <= b));
    assert!(dense_diff(&r.to_full().unwrap(), &x.to_full().unwrap()) < 1e-12);

    let e = TtVector::from_elementary(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
    let er = e.round(TruncationPolicy::with_tolerance(0.3));
    assert_eq!(er.ranks(), vec![1, 1, 1, 1]);
    assert!(dense_diff(&er.to_full().unwrap(), &e.to_full().unwrap()) < 1e-12);
}

#[test]
fn rounding_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = random_tt(&mut rng, &[3, 4, 3, 2], 3);
    let p = TruncationPolicy::new(0.05, 2).unwrap();
    let once = x.round(p);
    let twice = once.round(p);
    assert_eq!(once.ranks(), twice.ranks());
    let d = dense_diff(&once.to_full().unwrap(), &twice.to_full().unwrap());
    assert!(d <= 1e-12 * once.norm());
}

#[test]
fn matvec_matches_dense_and_multiplies_ranks() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let dims = [3usize, 3, 3];
    // Rank-2 operator A = sum of two Kronecker products, assembled as TT
    // cores by hand, with the dense oracle built independently.
    let terms: Vec<Vec<DMatrix<f64>>> = (0..2)
        .map(|_| dims.iter().map(|&n| DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))).collect())
        .collect();
    let mut cores = Vec::new();
    for k in 0..3 {
        let (l, r) = match k {
            0 => (1, 2),
            2 => (2, 1),
            _ => (2, 2),
        };
        let mut c = Core::zeros(l, 9, r);
        for t in 0..2 {
            let (a, b) = match k {
                0 => (0, t),
                2 => (t, 0),
                _ => (t, t),
            };
            for i in 0..3 {
                for j in 0..3 {
                    c.set(a, i + 3 * j, b, terms[t][k][(i, j)]);
                }
            }
        }
        cores.push(c);
    }
    let a = TtMatrix::from_cores(cores, dims.to_vec(), dims.to_vec()).unwrap();
    let dense = terms
        .iter()
        .map(|t| kron_mat(&kron_mat(&t[0], &t[1]), &t[2]))
        .fold(DMatrix::zeros(27, 27), |acc, m| acc + m);
    assert!((a.to_dense(1 << 20).unwrap() - &dense).abs().max() < 1e-13);

    let x = TtVector::from_cores(vec![
        Core::from_vec(1, 3, 3, (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        Core::from_vec(3, 3, 3, (0..27).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        Core::from_vec(3, 3, 1, (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()),
    ])
    .unwrap();
    let y = a.matvec_unrounded(&x).unwrap();
    assert_eq!(y.ranks(), vec![1, 6, 6, 1]);
    let expect = &dense * nalgebra::DVector::from_vec(x.to_full().unwrap());
    let got = y.to_full().unwrap();
    for (g, e) in got.iter().zip(expect.iter()) {
        assert!((g - e).abs() <= 1e-11);
    }
    let rounded = a.matvec(&x, TruncationPolicy::exact()).unwrap();
    assert!(dense_diff(&rounded.to_full().unwrap(), expect.as_slice()) <= 1e-11);
}

#[test]
fn kron_matvec_on_elementary_stays_rank_one() {
    let a1 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let a2 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0]);
    let u = vec![1.0, -1.0];
    let v = vec![2.0, 0.5, 1.0];
    let a = TtMatrix::from_kron(&[a1.clone(), a2.clone()]).unwrap();
    let x = TtVector::from_elementary(&[u.clone(), v.clone()]).unwrap();
    let y = a.matvec(&x, TruncationPolicy::exact()).unwrap();
    assert_eq!(y.max_rank(), 1);
    let au: Vec<f64> = (&a1 * nalgebra::DVector::from_vec(u)).iter().copied().collect();
    let av: Vec<f64> = (&a2 * nalgebra::DVector::from_vec(v)).iter().copied().collect();
    assert!(dense_diff(&y.to_full().unwrap(), &kron_vec(&[au, av])) < 1e-14);

    let id = TtMatrix::identity(&[2, 3]).unwrap();
    let z = id.matvec(&x, TruncationPolicy::exact()).unwrap();
    assert!(dense_diff(&z.to_full().unwrap(), &x.to_full().unwrap()) < 1e-14);
    assert!(id.matvec(&TtVector::ones(&[3, 2]).unwrap(), TruncationPolicy::exact()).is_err());
}

#[test]
fn effective_rank_solves_storage_equation() {
    let x = TtVector::from_cores(vec![
        Core::zeros(1, 2, 2),
        Core::zeros(2, 2, 3),
        Core::zeros(3, 2, 1),
    ])
    .unwrap();
    assert_eq!(x.storage(), 22);
    let r = x.effective_rank();
    assert!((2.0 * r * r + 4.0 * r - 22.0).abs() < 1e-12);
    assert!((r - (-4.0 + 192f64.sqrt()) / 4.0).abs() < 1e-12);
    assert!((r - 2.4641).abs() < 1e-4);

    let uniform = TtVector::from_cores(vec![
        Core::zeros(1, 5, 4),
        Core::zeros(4, 5, 4),
        Core::zeros(4, 5, 4),
        Core::zeros(4, 5, 1),
    ])
    .unwrap();
    assert!((uniform.effective_rank() - 4.0).abs() < 1e-12);
    let one = TtVector::ones(&[3, 3, 3]).unwrap();
    assert!((one.effective_rank() - 1.0).abs() < 1e-12);
    let two = TtVector::from_cores(vec![Core::zeros(1, 3, 2), Core::zeros(2, 4, 1)]).unwrap();
    assert!((two.effective_rank() - 2.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_combinations_match_dense(seed in any::<u64>(), order in 1usize..=4, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = random_dims(&mut rng, order, 4);
        let x = random_tt(&mut rng, &dims, 3);
        let y = random_tt(&mut rng, &dims, 3);
        let z = x.scale(a).add(&y.scale(b)).unwrap();
        let (fx, fy) = (x.to_full().unwrap(), y.to_full().unwrap());
        let expect: Vec<f64> = fx.iter().zip(&fy).map(|(p, q)| a * p + b * q).collect();
        prop_assert!(dense_diff(&z.to_full().unwrap(), &expect) <= 1e-11);
    }

    #[test]
    fn rounding_meets_relative_bound(seed in any::<u64>(), order in 2usize..=4, eps in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = random_dims(&mut rng, order, 4);
        let x = random_tt(&mut rng, &dims, 4);
        let r = x.round(TruncationPolicy::with_tolerance(eps));
        let fx = x.to_full().unwrap();
        let err = dense_diff(&r.to_full().unwrap(), &fx);
        prop_assert!(err <= eps * dense_norm(&fx) + 1e-12);
        prop_assert!(r.ranks().iter().zip(x.ranks()).all(|(a, b)| *a <= b));
    }

    #[test]
    fn cauchy_schwarz_holds(seed in any::<u64>(), order in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = random_dims(&mut rng, order, 4);
        let x = random_tt(&mut rng, &dims, 3);
        let y = random_tt(&mut rng, &dims, 3);
        prop_assert!(x.dot(&y).unwrap().abs() <= x.norm() * y.norm() * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn max_rank_is_enforced(seed in any::<u64>(), cap in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tt(&mut rng, &[3, 4, 4, 3], 4);
        let r = x.round(TruncationPolicy::with_max_rank(cap));
        prop_assert!(r.max_rank() <= cap);
    }
}
