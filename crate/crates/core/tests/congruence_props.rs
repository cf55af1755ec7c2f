mod common;

use common::*;
use nalgebra::DMatrix;
use pdpkit::congruence::{diagonalize_family, diagonalize_pair, FamilyDiagonalization};
use pdpkit::symmat::DEFAULT_TOL;
use proptest::prelude::*;

/// Sorted eigenvalues of `A⁻¹B` through a general (non-symmetric) solver,
/// independent of the Cholesky route.
fn pencil_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let m = a.clone().try_inverse().unwrap() * b;
    let mut ev: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pair_whitens_and_diagonalizes(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let a = random_pd(n, &mut r);
        let b = random_sym(n, &mut r);
        let p = diagonalize_pair(&a, &b, DEFAULT_TOL).unwrap();
        let wa = a.congruence(&p.w).unwrap();
        let wb = b.congruence(&p.w).unwrap();
        prop_assert!((wa.as_matrix() - DMatrix::identity(n, n)).norm() <= 1e-8 * a.max_abs().max(1.0));
        prop_assert!(wb.max_offdiag() <= 1e-8 * b.max_abs().max(1.0));
        for i in 0..n {
            prop_assert!((wb.get(i, i) - p.mu[i]).abs() <= 1e-8 * b.max_abs().max(1.0));
        }
        prop_assert!(p.mu.windows(2).all(|w| w[0] <= w[1]));
        let oracle = pencil_eigenvalues(a.as_matrix(), b.as_matrix());
        for (x, y) in p.mu.iter().zip(&oracle) {
            prop_assert!((x - y).abs() <= 1e-8 * y.abs().max(1.0));
        }
    }

    #[test]
    fn mu_is_congruence_invariant(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let a = random_pd(n, &mut r);
        let b = random_sym(n, &mut r);
        let s = random_invertible(n, &mut r);
        let p1 = diagonalize_pair(&a, &b, DEFAULT_TOL).unwrap();
        let p2 = diagonalize_pair(&a.congruence(&s).unwrap(), &b.congruence(&s).unwrap(), DEFAULT_TOL).unwrap();
        for (x, y) in p1.mu.iter().zip(&p2.mu) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
        }
    }

    #[test]
    fn shared_congruence_families_diagonalize(seed in any::<u64>(), n in 1usize..=5, extra in 0usize..3) {
        let mut r = rng(seed);
        let rank = (1 + extra).min(n);
        let (u, _) = diagonalizable_basis(n, rank, &mut r);
        let FamilyDiagonalization::Diagonalizable(jd) = diagonalize_family(&u, DEFAULT_TOL).unwrap() else {
            return Err(TestCaseError::fail("shared-congruence family reported non-diagonalizable"));
        };
        for (k, uk) in u.iter().enumerate() {
            let d = uk.congruence(&jd.w).unwrap();
            prop_assert!(d.max_offdiag() <= 1e-8 * uk.max_abs().max(1.0));
            for i in 0..n {
                prop_assert!((d.get(i, i) - jd.lambda[(i, k)]).abs() <= 1e-8 * uk.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn pd_pairs_are_always_diagonalizable(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let u = vec![random_pd(n, &mut r), random_pd(n, &mut r)];
        let diag = diagonalize_family(&u, DEFAULT_TOL).unwrap();
        prop_assert!(matches!(diag, FamilyDiagonalization::Diagonalizable(_)));
        let single = diagonalize_family(&u[..1], DEFAULT_TOL).unwrap();
        prop_assert!(matches!(single, FamilyDiagonalization::Diagonalizable(_)));
    }
}

#[test]
fn generic_triples_do_not_commute() {
    let mut r = rng(5);
    let u = vec![random_pd(3, &mut r), random_pd(3, &mut r), random_pd(3, &mut r)];
    assert!(matches!(
        diagonalize_family(&u, DEFAULT_TOL).unwrap(),
        FamilyDiagonalization::NotSimultaneouslyDiagonalizable { .. }
    ));
}
