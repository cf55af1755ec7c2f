// Seeded random instance generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use pdpkit::{CanonicalForm, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_matrix(m).unwrap()
}

pub fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let g = gaussian(n, n, rng);
    sym((&g + g.transpose()) * 0.5)
}

/// PSD of the given rank (`rank = 0` gives the zero matrix).
pub fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let g = gaussian(n, rank, rng);
    sym(&g * g.transpose())
}

pub fn random_pd(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let g = gaussian(n, n, rng);
    sym(&g * g.transpose() + DMatrix::identity(n, n) * 0.1)
}

pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let qr = gaussian(n, n, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix column signs so the distribution is Haar.
    let signs = DMatrix::from_fn(n, n, |i, j| if i == j && r[(i, i)] < 0.0 { -1.0 } else if i == j { 1.0 } else { 0.0 });
    q * signs
}

/// Well-conditioned invertible matrix.
pub fn random_invertible(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let q1 = random_orthogonal(n, rng);
    let q2 = random_orthogonal(n, rng);
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { rng.random_range(0.5..2.0) } else { 0.0 });
    q1 * d * q2
}

/// Symmetric with a clearly negative eigenvalue.
pub fn random_non_psd(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    loop {
        let s = random_sym(n, rng);
        if s.min_eigenvalue() < -0.05 * s.max_abs().max(1.0) {
            return s;
        }
    }
}

/// Symmetric coefficient that is PSD, PSD-singular, or indefinite with
/// roughly equal frequency.
pub fn mixed_coefficient(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    match rng.random_range(0..3) {
        0 => random_pd(n, rng),
        1 => random_psd(n, rng.random_range(1..n.max(2)).min(n), rng),
        _ => random_non_psd(n, rng),
    }
}

/// Rank-1 form with a PD image element; preserving iff `preserving`.
pub fn rank1_instance(n: usize, preserving: bool, rng: &mut ChaCha8Rng) -> CanonicalForm {
    let b = if preserving {
        random_psd(n, rng.random_range(1..=n), rng)
    } else {
        random_non_psd(n, rng)
    };
    CanonicalForm::new(vec![b], vec![random_pd(n, rng)]).unwrap()
}

/// Rank-2 form with a PD image basis. Preserving instances come from PSD
/// coefficients; the rest mix a PSD part with an indefinite one of random
/// weight, so both outcomes and the boundary between them are exercised.
pub fn rank2_instance(n: usize, rng: &mut ChaCha8Rng) -> CanonicalForm {
    let u = vec![random_pd(n, rng), random_pd(n, rng)];
    let b = if rng.random_bool(0.5) {
        vec![random_pd(n, rng), random_psd(n, rng.random_range(0..=n), rng)]
    } else {
        let w: f64 = rng.random_range(0.0..1.5);
        vec![
            &random_pd(n, rng) + &random_sym(n, rng).scale(w),
            &random_sym(n, rng).scale(w) + &random_psd(n, 1, rng),
        ]
    };
    CanonicalForm::new(b, u).unwrap()
}

/// Family `U_k = S diag(λ_k) Sᵗ` sharing one congruence `S`, with positive,
/// linearly independent diagonals (needs `r ≤ n`).
pub fn diagonalizable_basis(n: usize, r: usize, rng: &mut ChaCha8Rng) -> (Vec<SymMatrix>, DMatrix<f64>) {
    assert!(r <= n);
    let s = random_invertible(n, rng);
    loop {
        let lambda = DMatrix::from_fn(n, r, |_, _| rng.random_range(0.2..3.0));
        if (lambda.transpose() * &lambda).symmetric_eigenvalues().min() < 0.05 * 0.05 {
            continue;
        }
        let u = (0..r)
            .map(|k| {
                let d = DMatrix::from_diagonal(&lambda.column(k).into_owned());
                sym(&s * d * s.transpose())
            })
            .collect();
        return (u, lambda);
    }
}

pub fn diagonalizable_instance(n: usize, r: usize, rng: &mut ChaCha8Rng) -> CanonicalForm {
    let (u, _) = diagonalizable_basis(n, r, rng);
    let b = (0..r)
        .map(|k| if k == 0 || rng.random_bool(0.6) { random_pd(n, rng) } else { mixed_coefficient(n, rng) })
        .collect();
    CanonicalForm::new(b, u).unwrap()
}

/// Independent PD check via Cholesky, not via the eigen-based classifier.
pub fn cholesky_pd(a: &SymMatrix) -> bool {
    a.as_matrix().clone().cholesky().is_some()
}

/// Independent evaluation path: `Σ_k tr(A B_k) U_k` with traces computed as
/// elementwise sums.
pub fn evaluate_direct(cf: &CanonicalForm, a: &SymMatrix) -> DMatrix<f64> {
    let n = cf.n;
    let mut out = DMatrix::zeros(n, n);
    for (b, u) in cf.b.iter().zip(&cf.u) {
        let t = a.as_matrix().component_mul(b.as_matrix()).sum();
        out += u.as_matrix() * t;
    }
    out
}

/// Counterexample check independent of the library's classifier: `a` is PD
/// by Cholesky, and `T(a)` has an eigenvalue at or below the tolerance line.
pub fn reverifies(cf: &CanonicalForm, a: &SymMatrix, tol: f64) -> bool {
    let image = evaluate_direct(cf, a);
    let eig = image.clone().symmetric_eigenvalues();
    let scale = eig.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    cholesky_pd(a) && eig.min() <= tol * scale
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}
