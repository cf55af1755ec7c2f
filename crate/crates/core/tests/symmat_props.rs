mod common;

use common::*;
use nalgebra::DMatrix;
use pdpkit::symmat::{trace_inner, DEFAULT_TOL};
use pdpkit::{Definiteness, SymMatrix};
use proptest::prelude::*;

fn ulps_apart(a: f64, b: f64) -> u64 {
    if a == b {
        return 0;
    }
    let (ia, ib) = (a.to_bits() as i64, b.to_bits() as i64);
    if (ia < 0) != (ib < 0) {
        return u64::MAX;
    }
    ia.abs_diff(ib)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rank_decomposition_reconstructs(seed in any::<u64>(), n in 1usize..=6) {
        let a = random_sym(n, &mut rng(seed));
        let d = a.rank_decompose(DEFAULT_TOL).unwrap();
        let back = d.reconstruct();
        prop_assert!((a.as_matrix() - back.as_matrix()).norm() <= 1e-9 * a.frobenius_norm().max(1.0));
        for i in 0..d.rank() {
            for j in (i + 1)..d.rank() {
                let c = d.vectors[i].dot(&d.vectors[j]);
                prop_assert!(c.abs() <= 1e-9 * d.vectors[i].norm().max(1.0) * d.vectors[j].norm().max(1.0));
            }
        }
    }

    #[test]
    fn trace_of_pd_times_nonzero_psd_is_positive(seed in any::<u64>(), n in 1usize..=6, rank in 1usize..=6) {
        let mut r = rng(seed);
        let a = random_pd(n, &mut r);
        let b = random_psd(n, rank.min(n), &mut r);
        prop_assert!(trace_inner(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn trace_of_psd_pair_is_sum_of_squared_overlaps(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let a = random_psd(n, (seed as usize % n) + 1, &mut r);
        let b = random_psd(n, ((seed >> 8) as usize % n) + 1, &mut r);
        let (da, db) = (a.rank_decompose(DEFAULT_TOL).unwrap(), b.rank_decompose(DEFAULT_TOL).unwrap());
        let mut sum = 0.0;
        for x in &da.vectors {
            for y in &db.vectors {
                sum += x.dot(y).powi(2);
            }
        }
        let t = trace_inner(&a, &b).unwrap();
        prop_assert!((t - sum).abs() <= 1e-9 * t.abs().max(1.0));
    }

    #[test]
    fn classification_survives_orthogonal_conjugation(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let m = match seed % 3 {
            0 => random_pd(n, &mut r),
            1 => random_psd(n, n.saturating_sub(1).max(1), &mut r),
            _ => random_sym(n, &mut r),
        };
        let q = random_orthogonal(n, &mut r);
        let c = m.congruence(&q.transpose()).unwrap();
        let (e1, e2) = (m.eigenvalues(), c.eigenvalues());
        for (x, y) in e1.iter().zip(&e2) {
            prop_assert!((x - y).abs() <= 1e-8 * m.max_abs().max(1.0));
        }
        // Singular PSD sits on a tolerance boundary; compare only clear-cut classes.
        let class = m.classify(DEFAULT_TOL).class;
        if class != Definiteness::PositiveSemidefiniteSingular {
            prop_assert_eq!(class, c.classify(DEFAULT_TOL).class);
        }
    }

    #[test]
    fn svec_is_an_isometry(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let a = random_sym(n, &mut r).scale(1.0 / 3.0);
        let b = random_sym(n, &mut r).scale(1.0 / 3.0);
        let dot = a.svec().dot(&b.svec());
        let t = trace_inner(&a, &b).unwrap();
        prop_assert!((dot - t).abs() <= 1e-12 * a.frobenius_norm().max(1.0) * b.frobenius_norm().max(1.0));
    }

    #[test]
    fn svec_round_trip_within_one_ulp(seed in any::<u64>(), n in 1usize..=6) {
        let a = random_sym(n, &mut rng(seed));
        let back = SymMatrix::unsvec(a.svec().as_slice(), n).unwrap();
        for i in 0..n {
            prop_assert_eq!(a.get(i, i), back.get(i, i));
            for j in (i + 1)..n {
                prop_assert!(ulps_apart(a.get(i, j), back.get(i, j)) <= 1);
            }
        }
    }

    #[test]
    fn min_eigenvalue_is_superadditive(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let x = random_sym(n, &mut r);
        let y = random_sym(n, &mut r);
        prop_assert!((&x + &y).min_eigenvalue() >= x.min_eigenvalue() + y.min_eigenvalue() - 1e-10);
    }
}

#[test]
fn svec_ordering_is_upper_triangle_row_major() {
    let a = SymMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 5.0], vec![3.0, 5.0, 6.0]]).unwrap();
    let s = 2f64.sqrt();
    let expected = [1.0, 2.0 * s, 3.0 * s, 4.0, 5.0 * s, 6.0];
    for (x, y) in a.svec().iter().zip(expected) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn eigenvectors_are_sign_normalized() {
    let a = SymMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0])).unwrap();
    let spec = a.eig().unwrap();
    for c in spec.eigenvectors.column_iter() {
        let first = c.iter().find(|x| x.abs() > 1e-10).unwrap();
        assert!(*first > 0.0);
    }
}
