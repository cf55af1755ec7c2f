//! Dense real symmetric matrices: the space of inputs and outputs of every
//! map this crate reasons about.
//!
//! All definiteness predicates share one tolerance policy. For a matrix with
//! eigenvalues `λ_1 ≥ … ≥ λ_n` let `scale = max(1, max |λ_i|)` and
//! `t = tol · scale`; then an eigenvalue is "positive" when it exceeds `t`,
//! "negative" when it is below `-t`, and "zero" otherwise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Default relative tolerance for PSD / rank predicates.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Iteration cap handed to the symmetric QR eigensolver.
const EIG_MAX_ITERS: usize = 10_000;

/// Dimension of the packed vector for `n × n` symmetric matrices.
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// A real symmetric `n × n` matrix. Symmetry is enforced on construction by
/// averaging the matrix with its transpose, so `get(i, j) == get(j, i)` holds
/// bit-for-bit.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{:?}", self.rows())
    }
}

impl SymMatrix {
    /// Builds a symmetric matrix from any square matrix by symmetrization.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        let n = m.nrows();
        let inner = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                // Addition is commutative in IEEE arithmetic, so (i,j) and
                // (j,i) receive identical bits.
                0.5 * (m[(i, j)] + m[(j, i)])
            }
        });
        Ok(Self { inner })
    }

    /// Row-major constructor.
    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_slice(n, &data)
    }

    /// Builds a matrix from a function of the indices; the result is
    /// symmetrized.
    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::from_matrix(DMatrix::from_fn(n, n, f)).expect("from_fn requires n ≥ 1 and finite entries")
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(values)),
        }
    }

    /// `E_ii` when `i == j`, otherwise `E_ij + E_ji`.
    pub fn basis_element(n: usize, i: usize, j: usize) -> Self {
        let mut inner = DMatrix::zeros(n, n);
        inner[(i, j)] = 1.0;
        inner[(j, i)] = 1.0;
        Self { inner }
    }

    /// `x xᵗ`.
    pub fn outer(x: &DVector<f64>) -> Self {
        Self::from_matrix(x * x.transpose()).expect("outer product of a finite nonempty vector")
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.inner
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.amax()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            inner: &self.inner * alpha,
        }
    }

    /// `W · self · Wᵗ` for an arbitrary (not necessarily square) `W`.
    pub fn congruence(&self, w: &DMatrix<f64>) -> Result<Self> {
        if w.ncols() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: w.ncols(),
            });
        }
        Self::from_matrix(w * &self.inner * w.transpose())
    }

    /// Largest absolute off-diagonal entry.
    pub fn max_offdiag(&self) -> f64 {
        let n = self.n();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.inner[(i, j)].abs());
                }
            }
        }
        m
    }

    fn check_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        Ok(())
    }

    /// Eigenvalues in nonincreasing order. Uses the unbounded QR iteration,
    /// which always terminates on finite input.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.inner.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("n ≥ 1")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Full spectral decomposition `M = Q Λ Qᵗ`.
    ///
    /// Eigenvalues are sorted nonincreasing; each eigenvector is signed so
    /// that its first non-negligible component is positive.
    pub fn eig(&self) -> Result<SpectralDecomposition> {
        let n = self.n();
        let se = self
            .inner
            .clone()
            .try_symmetric_eigen(f64::EPSILON, EIG_MAX_ITERS)
            .ok_or(Error::ConvergenceFailure {
                routine: "symmetric eigensolver",
            })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]).then(a.cmp(&b)));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = se.eigenvectors.column(src).into_owned();
            if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-10) {
                if first < 0.0 {
                    col.neg_mut();
                }
            }
            eigenvectors.set_column(dst, &col);
        }
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Definiteness class under the relative tolerance policy.
    pub fn classify(&self, tol: f64) -> PsdClass {
        PsdClass::from_eigenvalues(&self.eigenvalues(), tol)
    }

    /// Signed rank-one decomposition `M = Σ k_i x_i x_iᵗ`, `k_i ∈ {−1, +1}`,
    /// with pairwise orthogonal `x_i`.
    pub fn rank_decompose(&self, tol: f64) -> Result<RankDecomposition> {
        let spec = self.eig()?;
        let scale = tolerance_scale(&spec.eigenvalues);
        let mut vectors = Vec::new();
        let mut signs = Vec::new();
        for (k, &lambda) in spec.eigenvalues.iter().enumerate() {
            if lambda.abs() > tol * scale {
                vectors.push(spec.eigenvectors.column(k) * lambda.abs().sqrt());
                signs.push(if lambda > 0.0 { 1 } else { -1 });
            }
        }
        Ok(RankDecomposition {
            n: self.n(),
            vectors,
            signs,
        })
    }

    /// Packed upper triangle, row by row: `(1,1), (1,2), …, (1,n), (2,2), …`.
    /// Off-diagonal entries are scaled by √2 so that
    /// `svec(A) · svec(B) = tr(A B)`.
    pub fn svec(&self) -> DVector<f64> {
        let n = self.n();
        let mut v = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            v.push(self.inner[(i, i)]);
            for j in (i + 1)..n {
                v.push(self.inner[(i, j)] * std::f64::consts::SQRT_2);
            }
        }
        DVector::from_vec(v)
    }

    /// Inverse of [`SymMatrix::svec`].
    pub fn unsvec(v: &[f64], n: usize) -> Result<Self> {
        if v.len() != packed_len(n) {
            return Err(Error::DimensionMismatch {
                expected: packed_len(n),
                found: v.len(),
            });
        }
        let mut inner = DMatrix::zeros(n, n);
        let mut idx = 0;
        for i in 0..n {
            inner[(i, i)] = v[idx];
            idx += 1;
            for j in (i + 1)..n {
                let x = unscale_sqrt2(v[idx]);
                inner[(i, j)] = x;
                inner[(j, i)] = x;
                idx += 1;
            }
        }
        Self::from_matrix(inner)
    }
}

/// `v / √2`, nudged by one ulp when a neighbour maps back onto `v` exactly.
fn unscale_sqrt2(v: f64) -> f64 {
    let y = v / std::f64::consts::SQRT_2;
    if y * std::f64::consts::SQRT_2 == v {
        return y;
    }
    for c in [y.next_up(), y.next_down()] {
        if c * std::f64::consts::SQRT_2 == v {
            return c;
        }
    }
    y
}

/// `tr(A B) = Σ_ij A_ij B_ij`.
pub fn trace_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    a.check_dim(b)?;
    Ok(a.inner.dot(&b.inner))
}

/// `max(1, max |λ|)`.
pub fn tolerance_scale(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n(), rhs.n(), "dimension mismatch in SymMatrix addition");
        SymMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n(), rhs.n(), "dimension mismatch in SymMatrix subtraction");
        SymMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

/// `Σ_k coeffs[k] · mats[k]`.
pub fn linear_combination(coeffs: &[f64], mats: &[SymMatrix]) -> Result<SymMatrix> {
    let first = mats.first().ok_or_else(|| Error::InvalidInput("empty linear combination".into()))?;
    if coeffs.len() != mats.len() {
        return Err(Error::DimensionMismatch {
            expected: mats.len(),
            found: coeffs.len(),
        });
    }
    let n = first.n();
    let mut acc = DMatrix::zeros(n, n);
    for (c, m) in coeffs.iter().zip(mats) {
        first.check_dim(m)?;
        acc += &m.inner * *c;
    }
    Ok(SymMatrix { inner: acc })
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `M = Q diag(λ) Qᵗ` with orthogonal `Q` (eigenvectors in columns).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> SymMatrix {
        let q = &self.eigenvectors;
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        SymMatrix::from_matrix(q * d * q.transpose()).expect("finite reconstruction")
    }
}

/// `M = Σ_i k_i x_i x_iᵗ`.
#[derive(Debug, Clone)]
pub struct RankDecomposition {
    pub n: usize,
    pub vectors: Vec<DVector<f64>>,
    pub signs: Vec<i8>,
}

impl RankDecomposition {
    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn reconstruct(&self) -> SymMatrix {
        let mut acc = DMatrix::zeros(self.n, self.n);
        for (x, &k) in self.vectors.iter().zip(&self.signs) {
            acc += x * x.transpose() * f64::from(k);
        }
        SymMatrix::from_matrix(acc).expect("finite reconstruction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefiniteSingular,
    Indefinite,
    NegativeSemidefinite,
    NegativeDefinite,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdClass {
    pub class: Definiteness,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl PsdClass {
    /// Classifies from a nonincreasing (or any-order) eigenvalue list.
    pub fn from_eigenvalues(eigenvalues: &[f64], tol: f64) -> Self {
        let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let t = tol * tolerance_scale(eigenvalues);
        use Definiteness::*;
        let class = if max.abs() <= t && min.abs() <= t {
            Zero
        } else if min > t {
            PositiveDefinite
        } else if max < -t {
            NegativeDefinite
        } else if min >= -t {
            PositiveSemidefiniteSingular
        } else if max <= t {
            NegativeSemidefinite
        } else {
            Indefinite
        };
        Self {
            class,
            min_eigenvalue: min,
            max_eigenvalue: max,
        }
    }

    pub fn is_pd(&self) -> bool {
        self.class == Definiteness::PositiveDefinite
    }

    /// PSD including the zero matrix.
    pub fn is_psd(&self) -> bool {
        matches!(
            self.class,
            Definiteness::PositiveDefinite | Definiteness::PositiveSemidefiniteSingular | Definiteness::Zero
        )
    }

    pub fn is_zero(&self) -> bool {
        self.class == Definiteness::Zero
    }

    /// The "non-zero and positive semi-definite" predicate.
    pub fn is_nonzero_psd(&self) -> bool {
        matches!(
            self.class,
            Definiteness::PositiveDefinite | Definiteness::PositiveSemidefiniteSingular
        )
    }
}
