//! Simultaneous diagonalization by congruence.
//!
//! For a positive definite `A` and symmetric `B` there is an invertible `W`
//! with `W A Wᵗ = I` and `W B Wᵗ = diag(μ)`; the `μ_i` are the eigenvalues of
//! `A⁻¹ B`. Families `{U_1, …, U_r}` of positive definite matrices admit a
//! common `W` exactly when the whitened matrices `L⁻¹ U_k L⁻ᵗ` commute.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmat::{tolerance_scale, SymMatrix};

/// `W A Wᵗ = I`, `W B Wᵗ = diag(mu)` with `mu` nondecreasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CongruencePair {
    #[serde(with = "crate::serde_rows")]
    pub w: DMatrix<f64>,
    pub mu: Vec<f64>,
}

impl CongruencePair {
    pub fn mu_min(&self) -> f64 {
        self.mu[0]
    }

    pub fn mu_max(&self) -> f64 {
        self.mu[self.mu.len() - 1]
    }
}

/// `W U_k Wᵗ = diag(lambda[.., k])` for every member of a family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointDiagonalization {
    #[serde(with = "crate::serde_rows")]
    pub w: DMatrix<f64>,
    /// `n × r`; entry `(i, k)` is the `i`-th diagonal value of `W U_k Wᵗ`.
    #[serde(with = "crate::serde_rows")]
    pub lambda: DMatrix<f64>,
}

impl JointDiagonalization {
    pub fn n(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn r(&self) -> usize {
        self.lambda.ncols()
    }

    /// Row `i` of the λ table.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.lambda.row(i).iter().copied().collect()
    }
}

#[derive(Debug, Clone)]
pub enum FamilyDiagonalization {
    Diagonalizable(JointDiagonalization),
    /// Whitened members `i` and `j` (zero-based family indices) fail to
    /// commute.
    NotSimultaneouslyDiagonalizable {
        pair: (usize, usize),
        commutator_norm: f64,
    },
}

/// Lower Cholesky factor inverse `L⁻¹` of a positive definite matrix.
fn whitener(a: &SymMatrix, tol: f64, what: impl Fn() -> String) -> Result<DMatrix<f64>> {
    if !a.classify(tol).is_pd() {
        return Err(Error::NotPositiveDefinite { what: what() });
    }
    let n = a.n();
    let chol = a
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite { what: what() })?;
    chol.l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::NotPositiveDefinite { what: what() })
}

/// Simultaneous congruence diagonalization of a positive definite `a` and a
/// symmetric `b`.
pub fn diagonalize_pair(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<CongruencePair> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: b.n(),
        });
    }
    let l_inv = whitener(a, tol, || "first matrix of the pair".into())?;
    let m = b.congruence(&l_inv)?;
    let spec = m.eig()?;
    // eig sorts nonincreasing; walk it backwards.
    let n = a.n();
    let mut qt = DMatrix::zeros(n, n);
    let mut mu = Vec::with_capacity(n);
    for (row, k) in (0..n).rev().enumerate() {
        mu.push(spec.eigenvalues[k]);
        qt.set_row(row, &spec.eigenvectors.column(k).transpose());
    }
    Ok(CongruencePair { w: qt * l_inv, mu })
}

fn commutator_norm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a * b - b * a).norm()
}

/// Common congruence diagonalizer for a family of positive definite
/// matrices, anchored on `u[0]`.
pub fn diagonalize_family(u: &[SymMatrix], tol: f64) -> Result<FamilyDiagonalization> {
    let first = u
        .first()
        .ok_or_else(|| Error::InvalidInput("empty matrix family".into()))?;
    let n = first.n();
    for (k, uk) in u.iter().enumerate() {
        if uk.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: uk.n(),
            });
        }
        if !uk.classify(tol).is_pd() {
            return Err(Error::NotPositiveDefinite {
                what: format!("family member {k}"),
            });
        }
    }
    let l_inv = whitener(first, tol, || "family member 0".into())?;
    let whitened: Vec<SymMatrix> = u[1..]
        .iter()
        .map(|uk| uk.congruence(&l_inv))
        .collect::<Result<_>>()?;

    for i in 0..whitened.len() {
        for j in (i + 1)..whitened.len() {
            let (mi, mj) = (whitened[i].as_matrix(), whitened[j].as_matrix());
            let c = commutator_norm(mi, mj);
            if c > tol * mi.norm() * mj.norm() {
                return Ok(FamilyDiagonalization::NotSimultaneouslyDiagonalizable {
                    pair: (i + 1, j + 1),
                    commutator_norm: c,
                });
            }
        }
    }

    let q = common_eigenbasis(n, &whitened, tol)?;
    let w = q.transpose() * l_inv;
    let mut lambda = DMatrix::zeros(n, u.len());
    for (k, uk) in u.iter().enumerate() {
        let d = uk.congruence(&w)?;
        for i in 0..n {
            lambda[(i, k)] = d.get(i, i);
        }
    }
    Ok(FamilyDiagonalization::Diagonalizable(JointDiagonalization { w, lambda }))
}

/// Orthogonal `Q` whose columns diagonalize every (pairwise commuting)
/// matrix in `mats`. Each matrix refines the eigenspace blocks left by the
/// previous ones.
fn common_eigenbasis(n: usize, mats: &[SymMatrix], tol: f64) -> Result<DMatrix<f64>> {
    let mut blocks: Vec<DMatrix<f64>> = vec![DMatrix::identity(n, n)];
    for m in mats {
        let scale = tolerance_scale(&m.eigenvalues());
        let mut refined = Vec::with_capacity(blocks.len());
        for v in blocks {
            if v.ncols() == 1 {
                refined.push(v);
                continue;
            }
            let restricted = m.congruence(&v.transpose())?;
            let spec = restricted.eig()?;
            let rotated = &v * &spec.eigenvectors;
            let mut start = 0;
            for end in 1..=rotated.ncols() {
                let split = end == rotated.ncols()
                    || (spec.eigenvalues[end - 1] - spec.eigenvalues[end]).abs() > tol * scale;
                if split {
                    refined.push(rotated.columns(start, end - start).into_owned());
                    start = end;
                }
            }
        }
        blocks = refined;
    }
    let mut q = DMatrix::zeros(n, n);
    let mut col = 0;
    for b in &blocks {
        for c in 0..b.ncols() {
            q.set_column(col, &b.column(c));
            col += 1;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    fn offdiag(m: &SymMatrix) -> f64 {
        m.max_offdiag()
    }

    #[test]
    fn pair_diagonal_example() {
        let a = SymMatrix::diagonal(&[4.0, 1.0]);
        let b = SymMatrix::diagonal(&[2.0, 3.0]);
        let p = diagonalize_pair(&a, &b, TOL).unwrap();
        assert!((p.mu[0] - 0.5).abs() < 1e-14);
        assert!((p.mu[1] - 3.0).abs() < 1e-14);
        let wa = a.congruence(&p.w).unwrap();
        let wb = b.congruence(&p.w).unwrap();
        assert!((&wa - &SymMatrix::identity(2)).frobenius_norm() < 1e-14);
        assert!((&wb - &SymMatrix::diagonal(&[0.5, 3.0])).frobenius_norm() < 1e-14);
        assert!((p.w[(0, 0)].abs() - 0.5).abs() < 1e-14);
        assert!((p.w[(1, 1)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pair_with_identity_is_spectral() {
        let b = SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let p = diagonalize_pair(&SymMatrix::identity(2), &b, TOL).unwrap();
        assert!((p.mu_min() + 1.0).abs() < 1e-14 && (p.mu_max() - 1.0).abs() < 1e-14);
        let wwt = &p.w * p.w.transpose();
        assert!((wwt - DMatrix::<f64>::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn pair_equal_matrices() {
        let a = SymMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let p = diagonalize_pair(&a, &a, TOL).unwrap();
        for m in p.mu {
            assert!((m - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn pair_rejects_non_pd_anchor() {
        let r = diagonalize_pair(&SymMatrix::diagonal(&[1.0, -1.0]), &SymMatrix::identity(2), TOL);
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn family_single_member() {
        let u = [SymMatrix::diagonal(&[2.0, 8.0])];
        let FamilyDiagonalization::Diagonalizable(jd) = diagonalize_family(&u, TOL).unwrap() else {
            panic!("single PD matrix is always diagonalizable");
        };
        assert!((jd.w[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((jd.w[(1, 1)].abs() - 0.125f64.sqrt()).abs() < 1e-14);
        assert!((jd.lambda[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((jd.lambda[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn family_already_diagonal() {
        let u = [
            SymMatrix::identity(2),
            SymMatrix::diagonal(&[1.0, 2.0]),
            SymMatrix::diagonal(&[3.0, 1.0]),
        ];
        let FamilyDiagonalization::Diagonalizable(jd) = diagonalize_family(&u, TOL).unwrap() else {
            panic!("diagonal family");
        };
        let mut rows: Vec<Vec<f64>> = (0..2).map(|i| jd.row(i)).collect();
        rows.sort_by(|a, b| a[1].total_cmp(&b[1]));
        let expect = [[1.0, 1.0, 3.0], [1.0, 2.0, 1.0]];
        for (row, e) in rows.iter().zip(expect) {
            for (x, y) in row.iter().zip(e) {
                assert!((x - y).abs() < 1e-14);
            }
        }
        for uk in &u {
            assert!(offdiag(&uk.congruence(&jd.w).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn family_non_commuting() {
        let u = [
            SymMatrix::identity(2),
            SymMatrix::diagonal(&[1.0, 2.0]),
            SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap(),
        ];
        match diagonalize_family(&u, TOL).unwrap() {
            FamilyDiagonalization::NotSimultaneouslyDiagonalizable { pair, commutator_norm } => {
                assert_eq!(pair, (1, 2));
                // [diag(1,2), [[2,1],[1,2]]] = [[0,-1],[1,0]]
                assert!((commutator_norm - 2f64.sqrt()).abs() < 1e-14);
            }
            FamilyDiagonalization::Diagonalizable(_) => panic!("family does not commute"),
        }
    }

    #[test]
    fn family_with_repeated_eigenvalues_needs_refinement() {
        // U_2 = I leaves one 2-dim block; U_3 must split it.
        let q = {
            let c = 0.6f64;
            let s = 0.8f64;
            DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
        };
        let mk = |d: &[f64]| {
            SymMatrix::from_matrix(&q * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)) * q.transpose())
                .unwrap()
        };
        let u = [SymMatrix::identity(3), mk(&[2.0, 2.0, 5.0]), mk(&[1.0, 3.0, 1.0])];
        let FamilyDiagonalization::Diagonalizable(jd) = diagonalize_family(&u, TOL).unwrap() else {
            panic!("commuting family");
        };
        for uk in &u {
            assert!(offdiag(&uk.congruence(&jd.w).unwrap()) < 1e-12);
        }
    }
}
