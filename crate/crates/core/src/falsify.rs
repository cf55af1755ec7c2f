//! Counterexample construction and search.
//!
//! A counterexample is a positive definite `A` whose image `T(A)` is not
//! positive definite.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::canonical::CanonicalForm;
use crate::error::{Error, Result};
use crate::symmat::{tolerance_scale, SymMatrix, DEFAULT_TOL};

/// Diagonal floor added to every sampled `G Gᵗ` in [`sample_oracle`].
pub const ORACLE_FLOOR: f64 = 1e-6;

/// Step size below which a restart is abandoned.
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FalsifierConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step: f64,
    pub eps_floor: f64,
    pub seed: u64,
    pub tol: f64,
}

impl Default for FalsifierConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iters: 500,
            step: 0.1,
            eps_floor: 1e-6,
            seed: 0,
            tol: DEFAULT_TOL,
        }
    }
}

impl FalsifierConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidInput("falsifier restarts and max_iters must be positive".into()));
        }
        if !(self.step > 0.0 && self.eps_floor > 0.0 && self.tol > 0.0) {
            return Err(Error::InvalidInput("falsifier step, eps_floor and tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FalsifierReport {
    pub found: bool,
    pub best_a: SymMatrix,
    /// `λ_min(T(best_a))`.
    pub best_value: f64,
    pub iterations_used: usize,
    pub restarts_used: usize,
}

/// A positive definite `A` with `tr(A B) < 0` for a symmetric `b` that is not
/// positive semidefinite.
///
/// With `b = Q D Qᵗ`, weight `1` goes on the negative eigendirections and
/// `δ = |Σ_{μ<0} μ| / (2 Σ_{μ≥0} μ)` on the rest, which gives
/// `tr(A B) ≤ ½ Σ_{μ<0} μ`.
pub fn construct_trace_counterexample(b: &SymMatrix, tol: f64) -> Result<SymMatrix> {
    if b.classify(tol).is_psd() {
        return Err(Error::NotApplicable(
            "trace counterexample needs a matrix that is not positive semidefinite".into(),
        ));
    }
    let spec = b.eig()?;
    let neg: f64 = spec.eigenvalues.iter().filter(|&&m| m < 0.0).sum();
    let pos: f64 = spec.eigenvalues.iter().filter(|&&m| m >= 0.0).sum();
    let delta = if pos > 0.0 { neg.abs() / (2.0 * pos) } else { 1.0 };
    let c: Vec<f64> = spec
        .eigenvalues
        .iter()
        .map(|&m| if m < 0.0 { 1.0 } else { delta })
        .collect();
    let q = &spec.eigenvectors;
    SymMatrix::from_matrix(q * DMatrix::from_diagonal(&DVector::from_vec(c)) * q.transpose())
}

/// Whether `a` is positive definite and `image` is not.
pub fn is_violation(a: &SymMatrix, image: &SymMatrix, tol: f64) -> bool {
    a.classify(tol).is_pd() && !image.classify(tol).is_pd()
}

fn factor_to_input(g: &DMatrix<f64>, eps: f64) -> Result<SymMatrix> {
    let n = g.nrows();
    SymMatrix::from_matrix(g * g.transpose() + DMatrix::identity(n, n) * eps)
}

/// `f(G) = λ_min(T(G Gᵗ + ε I))`.
pub fn objective(cf: &CanonicalForm, g: &DMatrix<f64>, eps: f64) -> Result<f64> {
    let a = factor_to_input(g, eps)?;
    Ok(cf.evaluate(&a)?.min_eigenvalue())
}

/// Value and a subgradient of [`objective`] at `g`: with `v` a unit
/// eigenvector for `λ_min(T(A))` and `S = Σ_k (vᵗ U_k v) B_k`, the gradient
/// is `2 S G`.
pub fn subgradient(cf: &CanonicalForm, g: &DMatrix<f64>, eps: f64) -> Result<(f64, DMatrix<f64>)> {
    let a = factor_to_input(g, eps)?;
    let spec = cf.evaluate(&a)?.eig()?;
    let last = spec.eigenvalues.len() - 1;
    let v = spec.eigenvectors.column(last);
    let mut s = DMatrix::zeros(cf.n, cf.n);
    for (b, u) in cf.b.iter().zip(&cf.u) {
        let w = (v.transpose() * u.as_matrix() * v)[(0, 0)];
        s += b.as_matrix() * w;
    }
    Ok((spec.eigenvalues[last], s * g * 2.0))
}

fn unit_sphere(g: DMatrix<f64>) -> DMatrix<f64> {
    let norm = g.norm();
    if norm > 0.0 {
        g / norm
    } else {
        g
    }
}

struct RestartOutcome {
    a: SymMatrix,
    value: f64,
    iterations: usize,
    found: bool,
}

fn run_restart(cf: &CanonicalForm, cfg: &FalsifierConfig, restart: usize) -> Result<RestartOutcome> {
    let n = cf.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let mut g = unit_sphere(DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)));
    let (mut value, mut grad) = subgradient(cf, &g, cfg.eps_floor)?;
    let mut step = cfg.step;
    let mut iterations = 0;

    let check = |g: &DMatrix<f64>| -> Result<Option<SymMatrix>> {
        let a = factor_to_input(g, cfg.eps_floor)?;
        let image = cf.evaluate(&a)?;
        let ev = image.eigenvalues();
        let lmin = *ev.last().expect("n ≥ 1");
        if lmin < -cfg.tol * tolerance_scale(&ev) && is_violation(&a, &image, cfg.tol) {
            Ok(Some(a))
        } else {
            Ok(None)
        }
    };

    if let Some(a) = check(&g)? {
        return Ok(RestartOutcome { a, value, iterations, found: true });
    }
    while iterations < cfg.max_iters && step >= MIN_STEP {
        iterations += 1;
        let gnorm = grad.norm();
        if gnorm == 0.0 {
            break;
        }
        let candidate = unit_sphere(&g - &grad * (step / gnorm));
        let (cand_value, cand_grad) = subgradient(cf, &candidate, cfg.eps_floor)?;
        if cand_value < value {
            g = candidate;
            value = cand_value;
            grad = cand_grad;
            if let Some(a) = check(&g)? {
                return Ok(RestartOutcome { a, value, iterations, found: true });
            }
        } else {
            step *= 0.5;
        }
    }
    Ok(RestartOutcome {
        a: factor_to_input(&g, cfg.eps_floor)?,
        value,
        iterations,
        found: false,
    })
}

/// Minimizes `λ_min(T(A))` over `A = G Gᵗ + εI`, `‖G‖_F = 1`, by projected
/// subgradient descent with random restarts. Stops at the first restart that
/// reaches a verified violation.
pub fn falsify(cf: &CanonicalForm, cfg: &FalsifierConfig) -> Result<FalsifierReport> {
    cfg.validate()?;
    let mut best: Option<RestartOutcome> = None;
    let mut iterations_used = 0;
    for restart in 0..cfg.restarts {
        let out = run_restart(cf, cfg, restart)?;
        iterations_used += out.iterations;
        let found = out.found;
        if best.as_ref().is_none_or(|b| found || out.value < b.value) {
            best = Some(out);
        }
        if found {
            let best = best.expect("just set");
            return Ok(FalsifierReport {
                found: true,
                best_a: best.a,
                best_value: best.value,
                iterations_used,
                restarts_used: restart + 1,
            });
        }
    }
    let best = best.expect("restarts ≥ 1");
    Ok(FalsifierReport {
        found: false,
        best_a: best.a,
        best_value: best.value,
        iterations_used,
        restarts_used: cfg.restarts,
    })
}

/// Draws `A = G Gᵗ + 1e-6 I` with standard normal `G` and returns the first
/// `A` whose image under `image_of` is not positive definite.
pub fn sample_oracle_with(
    n: usize,
    trials: usize,
    seed: u64,
    tol: f64,
    mut image_of: impl FnMut(&SymMatrix) -> Result<SymMatrix>,
) -> Result<Option<SymMatrix>> {
    if trials == 0 {
        return Err(Error::InvalidInput("sample oracle needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = factor_to_input(&g, ORACLE_FLOOR)?;
        if !image_of(&a)?.classify(tol).is_pd() {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

pub fn sample_oracle(cf: &CanonicalForm, trials: usize, seed: u64, tol: f64) -> Result<Option<SymMatrix>> {
    sample_oracle_with(cf.n, trials, seed, tol, |a| cf.evaluate(a))
}
