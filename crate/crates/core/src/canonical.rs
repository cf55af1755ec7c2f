//! Linear maps on symmetric matrices and their trace form
//! `T(A) = Σ_k tr(A B_k) U_k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmat::{packed_len, trace_inner, SymMatrix};

/// Retries allowed when the PD shift makes the change of basis singular.
const REBASE_RETRIES: usize = 3;

/// A linear map `S_n → S_n` stored as an `N × N` matrix acting on `svec`
/// coordinates, `N = n(n+1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMapOnSym {
    n: usize,
    matrix: DMatrix<f64>,
}

impl LinearMapOnSym {
    pub fn new(n: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let big_n = packed_len(n);
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if matrix.nrows() != big_n || matrix.ncols() != big_n {
            return Err(Error::DimensionMismatch {
                expected: big_n,
                found: if matrix.nrows() != big_n { matrix.nrows() } else { matrix.ncols() },
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("map entries must be finite".into()));
        }
        Ok(Self { n, matrix })
    }

    /// Tabulates `f` on the orthonormal svec basis.
    pub fn from_fn(n: usize, mut f: impl FnMut(&SymMatrix) -> SymMatrix) -> Result<Self> {
        let big_n = packed_len(n);
        let mut matrix = DMatrix::zeros(big_n, big_n);
        for j in 0..big_n {
            let mut e = vec![0.0; big_n];
            e[j] = 1.0;
            let image = f(&SymMatrix::unsvec(&e, n)?);
            if image.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: image.n(),
                });
            }
            matrix.set_column(j, &image.svec());
        }
        Self::new(n, matrix)
    }

    pub fn identity(n: usize) -> Self {
        let big_n = packed_len(n);
        Self {
            n,
            matrix: DMatrix::identity(big_n, big_n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, a: &SymMatrix) -> Result<SymMatrix> {
        if a.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: a.n(),
            });
        }
        let v = &self.matrix * a.svec();
        SymMatrix::unsvec(v.as_slice(), self.n)
    }
}

/// `T(A) = Σ_k tr(A B_k) U_k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalForm {
    pub n: usize,
    pub b: Vec<SymMatrix>,
    pub u: Vec<SymMatrix>,
    pub basis_is_pd: bool,
}

impl CanonicalForm {
    /// A form from explicit coefficient matrices and image basis. No
    /// independence or definiteness is assumed.
    pub fn new(b: Vec<SymMatrix>, u: Vec<SymMatrix>) -> Result<Self> {
        if b.len() != u.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: b.len(),
            });
        }
        let n = u
            .first()
            .map(SymMatrix::n)
            .ok_or_else(|| Error::InvalidInput("canonical form needs at least one term".into()))?;
        for m in b.iter().chain(&u) {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.n(),
                });
            }
        }
        Ok(Self {
            n,
            b,
            u,
            basis_is_pd: false,
        })
    }

    pub fn rank(&self) -> usize {
        self.u.len()
    }

    pub fn evaluate(&self, a: &SymMatrix) -> Result<SymMatrix> {
        let mut acc = SymMatrix::zeros(self.n);
        for (b, u) in self.b.iter().zip(&self.u) {
            acc = &acc + &(u * trace_inner(a, b)?);
        }
        Ok(acc)
    }

    /// The svec matrix `Σ_k svec(U_k) svec(B_k)ᵗ`.
    pub fn to_map(&self) -> LinearMapOnSym {
        let big_n = packed_len(self.n);
        let mut matrix = DMatrix::zeros(big_n, big_n);
        for (b, u) in self.b.iter().zip(&self.u) {
            matrix += u.svec() * b.svec().transpose();
        }
        LinearMapOnSym { n: self.n, matrix }
    }

    /// True when every `U_k` classifies positive definite.
    pub fn basis_pd_check(&self, tol: f64) -> bool {
        self.u.iter().all(|u| u.classify(tol).is_pd())
    }
}

#[derive(Debug, Clone)]
pub enum Extracted {
    Form(CanonicalForm),
    /// `T = 0`; `T(A)` is never positive definite.
    ZeroMap,
}

#[derive(Debug, Clone)]
pub enum Rebased {
    Form(CanonicalForm),
    /// `T(I)` is not positive definite, so `I` is a counterexample.
    ImageHasNoPdElement { t_identity: SymMatrix },
}

/// Coordinates of `image` (a matrix in the span of `basis`) with respect to
/// `basis`, via the Gram system of the svec vectors.
fn coordinates(basis_svec: &[DVector<f64>], gram: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, image: &SymMatrix) -> Result<DVector<f64>> {
    let s = image.svec();
    let rhs = DVector::from_iterator(basis_svec.len(), basis_svec.iter().map(|u| u.dot(&s)));
    gram.solve(&rhs).ok_or(Error::ConvergenceFailure {
        routine: "image basis Gram solve",
    })
}

/// Assembles `B_1..B_r` such that `image_of(A) = Σ_k tr(A B_k) U_k`, from the
/// coordinates of `image_of(E_ii)` and `image_of(E_ij + E_ji)` in `basis`.
pub fn coefficient_matrices(
    n: usize,
    basis: &[SymMatrix],
    mut image_of: impl FnMut(&SymMatrix) -> Result<SymMatrix>,
) -> Result<Vec<SymMatrix>> {
    let r = basis.len();
    let basis_svec: Vec<DVector<f64>> = basis.iter().map(SymMatrix::svec).collect();
    let gram = DMatrix::from_fn(r, r, |i, j| basis_svec[i].dot(&basis_svec[j])).lu();
    let mut b = vec![DMatrix::<f64>::zeros(n, n); r];
    for i in 0..n {
        for j in i..n {
            let c = coordinates(&basis_svec, &gram, &image_of(&SymMatrix::basis_element(n, i, j))?)?;
            for k in 0..r {
                if i == j {
                    b[k][(i, i)] = c[k];
                } else {
                    b[k][(i, j)] = 0.5 * c[k];
                    b[k][(j, i)] = 0.5 * c[k];
                }
            }
        }
    }
    b.into_iter().map(SymMatrix::from_matrix).collect()
}

/// Orthonormal left singular vectors of `m` for singular values above
/// `tol · σ_max`, largest first.
///
/// Read off the symmetric eigenproblem of `[[0, M], [Mᵗ, 0]]`, whose
/// eigenpairs are `±σ_i` with vectors `(u_i, ±v_i) / √2`. nalgebra's SVD
/// returns inaccurate factors for some rank-deficient inputs; the symmetric
/// eigensolver does not.
fn left_singular_basis(m: &DMatrix<f64>, tol: f64) -> Result<Vec<DVector<f64>>> {
    let (rows, cols) = m.shape();
    let mut jw = DMatrix::zeros(rows + cols, rows + cols);
    jw.view_mut((0, rows), (rows, cols)).copy_from(m);
    jw.view_mut((rows, 0), (cols, rows)).copy_from(&m.transpose());
    let spec = SymMatrix::from_matrix(jw)?.eig()?;
    let sigma_max = spec.eigenvalues[0];
    if sigma_max <= 0.0 {
        return Ok(Vec::new());
    }
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for (k, &sigma) in spec.eigenvalues.iter().enumerate() {
        if sigma <= tol * sigma_max {
            break;
        }
        let mut u: DVector<f64> = spec.eigenvectors.view((0, k), (rows, 1)).column(0).into_owned();
        // Two Gram-Schmidt passes keep clustered singular vectors orthonormal.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&u);
                u -= q * c;
            }
        }
        let norm = u.norm();
        if norm == 0.0 {
            return Err(Error::ConvergenceFailure {
                routine: "image basis orthonormalization",
            });
        }
        basis.push(u / norm);
    }
    Ok(basis)
}

/// Canonical trace form of `t` with an svec-orthonormal image basis taken
/// from the left singular vectors.
pub fn extract(t: &LinearMapOnSym, tol: f64) -> Result<Extracted> {
    let n = t.n();
    let vectors = left_singular_basis(&t.matrix, tol)?;
    if vectors.is_empty() {
        return Ok(Extracted::ZeroMap);
    }
    let basis: Vec<SymMatrix> = vectors
        .iter()
        .map(|u| SymMatrix::unsvec(u.as_slice(), n))
        .collect::<Result<_>>()?;
    let b = coefficient_matrices(n, &basis, |e| t.apply(e))?;
    Ok(Extracted::Form(CanonicalForm {
        n,
        b,
        u: basis,
        basis_is_pd: false,
    }))
}

/// Replaces the image basis by a positive definite one, shifting each `U_k`
/// along `P = T(I) / λ_max(T(I))`.
///
/// The basis is svec-orthonormal on entry, so an unnormalized `T(I)` would
/// swamp every `U_k` and leave the new basis nearly collinear.
pub fn rebase_pd(cf: &CanonicalForm, tol: f64) -> Result<Rebased> {
    let n = cf.n;
    let r = cf.rank();
    let t_identity = cf.evaluate(&SymMatrix::identity(n))?;
    let p_class = t_identity.classify(tol);
    if !p_class.is_pd() {
        return Ok(Rebased::ImageHasNoPdElement { t_identity });
    }
    let p = t_identity.scale(1.0 / p_class.max_eigenvalue);
    let p_min = p_class.min_eigenvalue / p_class.max_eigenvalue;

    // Coordinates of P in the current basis.
    let basis_svec: Vec<DVector<f64>> = cf.u.iter().map(SymMatrix::svec).collect();
    let gram = DMatrix::from_fn(r, r, |i, j| basis_svec[i].dot(&basis_svec[j])).lu();
    let p_coords = coordinates(&basis_svec, &gram, &p)?;

    let mut shifts: Vec<f64> = cf
        .u
        .iter()
        .map(|u| (u.min_eigenvalue().min(0.0)).abs() / p_min + 1.0)
        .collect();
    let mut attempt = 0;
    loop {
        // Change of basis U' = U (I + p cᵗ); det = 1 + cᵗp.
        let cp: f64 = shifts.iter().zip(p_coords.iter()).map(|(c, p)| c * p).sum();
        let c_norm = shifts.iter().map(|c| c * c).sum::<f64>().sqrt();
        let det = 1.0 + cp;
        if det.abs() > tol * (1.0 + c_norm * p_coords.norm()) {
            break;
        }
        if attempt == REBASE_RETRIES {
            return Err(Error::RebaseDegenerate { retries: REBASE_RETRIES });
        }
        shifts[0] *= 2.0;
        attempt += 1;
    }

    let u: Vec<SymMatrix> = cf
        .u
        .iter()
        .zip(&shifts)
        .map(|(uk, &c)| uk + &(&p * c))
        .collect();
    if !u.iter().all(|uk| uk.classify(tol).is_pd()) {
        return Err(Error::RebaseDegenerate { retries: attempt });
    }
    let b = coefficient_matrices(n, &u, |e| cf.evaluate(e))?;
    Ok(Rebased::Form(CanonicalForm {
        n,
        b,
        u,
        basis_is_pd: true,
    }))
}
