//! The decision engine.
//!
//! Exact criteria (all for a PD image basis `U_k`):
//!
//! * rank 1: `T` preserves PD iff `B_1` is nonzero PSD;
//! * rank 2: with `μ` the eigenvalues of `U_1⁻¹ U_2`, iff `B_1 + μ_min B_2` and
//!   `B_1 + μ_max B_2` are nonzero PSD;
//! * any rank, when a single `W` diagonalizes every `U_k` by congruence
//!   (`W U_k Wᵗ = diag(λ_{·k})`): iff every `G_i = Σ_k λ_ik B_k` is nonzero
//!   PSD.
//!
//! Sufficient criteria, consulted only when no exact one applies: all `B_k`
//! nonzero PSD, or `Σ_k λ_{s_k}(U_k) B_k` nonzero PSD for every choice
//! `s ∈ {min, max}^r` of extreme eigenvalues.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::canonical::{extract, rebase_pd, CanonicalForm, Extracted, LinearMapOnSym, Rebased};
use crate::congruence::{diagonalize_family, diagonalize_pair, CongruencePair, FamilyDiagonalization, JointDiagonalization};
use crate::error::{Error, Result};
use crate::falsify::{construct_trace_counterexample, falsify, is_violation, FalsifierConfig, FalsifierReport};
use crate::symmat::{linear_combination, Definiteness, PsdClass, SymMatrix, DEFAULT_TOL};

/// Default cap on `r` for the `2^r` sign-pattern enumeration.
pub const DEFAULT_PATTERN_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Preserves,
    NotPreserving,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    Rank1,
    Rank2,
    RankRDiagonalizable,
    AllBkPsd,
    ExtremalEigen,
    TIdentityFails,
    FalsifierFound,
    Exhausted,
}

/// A matrix together with the spectral data behind its classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub matrix: SymMatrix,
    pub eigenvalues: Vec<f64>,
    pub class: Definiteness,
}

impl Witness {
    pub fn new(matrix: SymMatrix, tol: f64) -> Self {
        let eigenvalues = matrix.eigenvalues();
        let class = PsdClass::from_eigenvalues(&eigenvalues, tol).class;
        Self {
            matrix,
            eigenvalues,
            class,
        }
    }

    pub fn is_nonzero_psd(&self) -> bool {
        matches!(
            self.class,
            Definiteness::PositiveDefinite | Definiteness::PositiveSemidefiniteSingular
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extreme {
    Min,
    Max,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternRecord {
    pub pattern: Vec<Extreme>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub class: Definiteness,
}

impl PatternRecord {
    pub fn is_nonzero_psd(&self) -> bool {
        matches!(
            self.class,
            Definiteness::PositiveDefinite | Definiteness::PositiveSemidefiniteSingular
        )
    }
}

/// Evidence for the extreme-eigenvalue sufficient test: `(λ_min, λ_max)` of
/// each `U_k` and the class of `Σ_k λ_{s_k}(U_k) B_k` for every pattern `s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremalEvidence {
    pub u_extremes: Vec<[f64; 2]>,
    pub patterns: Vec<PatternRecord>,
    /// Lowest-index pattern that is not nonzero PSD.
    pub failing: Option<usize>,
}

impl ExtremalEvidence {
    pub fn preserves(&self) -> bool {
        self.failing.is_none()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllBkEvidence {
    pub b: Vec<Witness>,
    pub failing: Option<usize>,
}

impl AllBkEvidence {
    pub fn preserves(&self) -> bool {
        self.failing.is_none()
    }
}

/// What was tried before a rank `r ≥ 3` verdict without an exact test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attempts {
    /// Family indices of the non-commuting whitened pair.
    pub non_commuting_pair: (usize, usize),
    pub commutator_norm: f64,
    pub all_bk_psd: AllBkEvidence,
    /// `None` when `r` exceeds the pattern cap.
    pub extremal: Option<ExtremalEvidence>,
    pub falsifier: Option<FalsifierReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "rule", content = "payload")]
pub enum Certificate {
    Rank1 {
        b: Witness,
        u: Witness,
    },
    Rank2 {
        pair: CongruencePair,
        g_min: Witness,
        g_max: Witness,
        /// `"g_min"` or `"g_max"` when the test fails.
        failing: Option<String>,
    },
    RankRDiagonalizable {
        diagonalization: JointDiagonalization,
        g: Vec<Witness>,
        failing: Option<usize>,
    },
    AllBkPsd(AllBkEvidence),
    ExtremalEigen(ExtremalEvidence),
    TIdentityFails {
        zero_map: bool,
        t_identity: SymMatrix,
    },
    FalsifierFound(Attempts),
    Exhausted(Attempts),
}

impl Certificate {
    pub fn rule(&self) -> Rule {
        match self {
            Certificate::Rank1 { .. } => Rule::Rank1,
            Certificate::Rank2 { .. } => Rule::Rank2,
            Certificate::RankRDiagonalizable { .. } => Rule::RankRDiagonalizable,
            Certificate::AllBkPsd(_) => Rule::AllBkPsd,
            Certificate::ExtremalEigen(_) => Rule::ExtremalEigen,
            Certificate::TIdentityFails { .. } => Rule::TIdentityFails,
            Certificate::FalsifierFound(_) => Rule::FalsifierFound,
            Certificate::Exhausted(_) => Rule::Exhausted,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub certificate: Certificate,
    pub counterexample: Option<SymMatrix>,
    /// The trace form the certificate refers to (absent for the zero map).
    pub form: Option<CanonicalForm>,
}

impl Verdict {
    pub fn rule(&self) -> Rule {
        self.certificate.rule()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub tol: f64,
    pub falsifier: FalsifierConfig,
    pub pattern_cap: usize,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            falsifier: FalsifierConfig::default(),
            pattern_cap: DEFAULT_PATTERN_CAP,
        }
    }
}

fn check_rank(cf: &CanonicalForm, expected: usize) -> Result<()> {
    if cf.rank() != expected {
        return Err(Error::WrongRank {
            expected,
            found: cf.rank(),
        });
    }
    Ok(())
}

fn check_pd_basis(cf: &CanonicalForm, tol: f64) -> Result<()> {
    for (k, u) in cf.u.iter().enumerate() {
        if !u.classify(tol).is_pd() {
            return Err(Error::NotPositiveDefinite {
                what: format!("image basis element U_{}", k + 1),
            });
        }
    }
    Ok(())
}

/// PD input certifying that a failing witness `g` refutes preservation:
/// `I` when `g` is zero, otherwise a PD `A` with `tr(A g) < 0`.
fn refuting_input(g: &Witness, n: usize, tol: f64) -> Result<SymMatrix> {
    if g.class == Definiteness::Zero {
        Ok(SymMatrix::identity(n))
    } else {
        construct_trace_counterexample(&g.matrix, tol)
    }
}

fn refuted(cf: &CanonicalForm, a: SymMatrix, certificate: Certificate, tol: f64) -> Result<Verdict> {
    let image = cf.evaluate(&a)?;
    if !is_violation(&a, &image, tol) {
        return Err(Error::CounterexampleUnverified(format!("{:?}", certificate.rule())));
    }
    Ok(Verdict {
        outcome: Outcome::NotPreserving,
        certificate,
        counterexample: Some(a),
        form: Some(cf.clone()),
    })
}

fn proved(cf: &CanonicalForm, certificate: Certificate) -> Verdict {
    Verdict {
        outcome: Outcome::Preserves,
        certificate,
        counterexample: None,
        form: Some(cf.clone()),
    }
}

pub fn decide_rank1(cf: &CanonicalForm, tol: f64) -> Result<Verdict> {
    check_rank(cf, 1)?;
    check_pd_basis(cf, tol)?;
    let b = Witness::new(cf.b[0].clone(), tol);
    let u = Witness::new(cf.u[0].clone(), tol);
    if b.is_nonzero_psd() {
        return Ok(proved(cf, Certificate::Rank1 { b, u }));
    }
    let a = refuting_input(&b, cf.n, tol)?;
    refuted(cf, a, Certificate::Rank1 { b, u }, tol)
}

pub fn decide_rank2(cf: &CanonicalForm, tol: f64) -> Result<Verdict> {
    check_rank(cf, 2)?;
    check_pd_basis(cf, tol)?;
    let pair = diagonalize_pair(&cf.u[0], &cf.u[1], tol)?;
    let g_min = Witness::new(linear_combination(&[1.0, pair.mu_min()], &cf.b)?, tol);
    let g_max = Witness::new(linear_combination(&[1.0, pair.mu_max()], &cf.b)?, tol);
    let failing = if !g_min.is_nonzero_psd() {
        Some("g_min")
    } else if !g_max.is_nonzero_psd() {
        Some("g_max")
    } else {
        None
    };
    let Some(which) = failing else {
        return Ok(proved(
            cf,
            Certificate::Rank2 {
                pair,
                g_min,
                g_max,
                failing: None,
            },
        ));
    };
    let g = if which == "g_min" { &g_min } else { &g_max };
    let a = refuting_input(g, cf.n, tol)?;
    let cert = Certificate::Rank2 {
        pair,
        g_min,
        g_max,
        failing: Some(which.to_string()),
    };
    refuted(cf, a, cert, tol)
}

/// `G_i = Σ_k λ_ik B_k` for every row `i` of the λ table.
pub fn diagonal_witnesses(cf: &CanonicalForm, jd: &JointDiagonalization, tol: f64) -> Result<Vec<Witness>> {
    (0..jd.n())
        .map(|i| Ok(Witness::new(linear_combination(&jd.row(i), &cf.b)?, tol)))
        .collect()
}

pub fn decide_rankr_diagonalizable(cf: &CanonicalForm, jd: &JointDiagonalization, tol: f64) -> Result<Verdict> {
    if jd.r() != cf.rank() {
        return Err(Error::WrongRank {
            expected: jd.r(),
            found: cf.rank(),
        });
    }
    if jd.n() != cf.n {
        return Err(Error::DimensionMismatch {
            expected: cf.n,
            found: jd.n(),
        });
    }
    check_pd_basis(cf, tol)?;
    let g = diagonal_witnesses(cf, jd, tol)?;
    let failing = g.iter().position(|w| !w.is_nonzero_psd());
    match failing {
        None => Ok(proved(
            cf,
            Certificate::RankRDiagonalizable {
                diagonalization: jd.clone(),
                g,
                failing: None,
            },
        )),
        Some(i) => {
            let a = refuting_input(&g[i], cf.n, tol)?;
            let cert = Certificate::RankRDiagonalizable {
                diagonalization: jd.clone(),
                g,
                failing: Some(i),
            };
            refuted(cf, a, cert, tol)
        }
    }
}

/// Preserves when every `B_k` is nonzero PSD; inconclusive otherwise.
pub fn sufficient_all_bk_psd(cf: &CanonicalForm, tol: f64) -> AllBkEvidence {
    let b: Vec<Witness> = cf.b.iter().map(|m| Witness::new(m.clone(), tol)).collect();
    let failing = b.iter().position(|w| !w.is_nonzero_psd());
    AllBkEvidence { b, failing }
}

/// Preserves when `Σ_k λ_{s_k}(U_k) B_k` is nonzero PSD for all `2^r`
/// patterns `s`; inconclusive otherwise.
///
/// For PD `A`, `λ_min(T(A)) ≥ Σ_k λ_min(tr(A B_k) U_k)` and each summand is
/// `tr(A B_k)` times `λ_min(U_k)` or `λ_max(U_k)` depending on its sign, so
/// one of the patterns bounds `λ_min(T(A))` from below by `tr(A H_s) > 0`.
pub fn sufficient_extremal(cf: &CanonicalForm, tol: f64, cap: usize) -> Result<ExtremalEvidence> {
    let r = cf.rank();
    if r > cap {
        return Err(Error::RankTooLarge { rank: r, cap });
    }
    let u_extremes: Vec<[f64; 2]> = cf
        .u
        .iter()
        .map(|u| {
            let ev = u.eigenvalues();
            [ev[ev.len() - 1], ev[0]]
        })
        .collect();
    let mut patterns = Vec::with_capacity(1 << r);
    for mask in 0..(1usize << r) {
        let pattern: Vec<Extreme> = (0..r)
            .map(|k| if mask >> k & 1 == 1 { Extreme::Max } else { Extreme::Min })
            .collect();
        let coeffs: Vec<f64> = pattern
            .iter()
            .zip(&u_extremes)
            .map(|(s, e)| match s {
                Extreme::Min => e[0],
                Extreme::Max => e[1],
            })
            .collect();
        let h = linear_combination(&coeffs, &cf.b)?;
        let class = h.classify(tol);
        patterns.push(PatternRecord {
            pattern,
            min_eigenvalue: class.min_eigenvalue,
            max_eigenvalue: class.max_eigenvalue,
            class: class.class,
        });
    }
    let failing = patterns.iter().position(|p| !p.is_nonzero_psd());
    Ok(ExtremalEvidence {
        u_extremes,
        patterns,
        failing,
    })
}

/// Full pipeline: trace form, PD re-basis, exact tests, sufficient tests,
/// then the falsifier.
pub fn decide(t: &LinearMapOnSym, cfg: &DecisionConfig) -> Result<Verdict> {
    let tol = cfg.tol;
    let n = t.n();
    let cf = match extract(t, tol)? {
        Extracted::ZeroMap => {
            return Ok(Verdict {
                outcome: Outcome::NotPreserving,
                certificate: Certificate::TIdentityFails {
                    zero_map: true,
                    t_identity: SymMatrix::zeros(n),
                },
                counterexample: Some(SymMatrix::identity(n)),
                form: None,
            })
        }
        Extracted::Form(cf) => cf,
    };
    let cf = match rebase_pd(&cf, tol)? {
        Rebased::ImageHasNoPdElement { t_identity } => {
            let cert = Certificate::TIdentityFails {
                zero_map: false,
                t_identity,
            };
            return refuted(&cf, SymMatrix::identity(n), cert, tol);
        }
        Rebased::Form(cf) => cf,
    };
    decide_pd_form(&cf, cfg)
}

/// Everything after the PD re-basis: `cf` has a PD, linearly independent
/// image basis and linearly independent coefficients.
fn decide_pd_form(cf: &CanonicalForm, cfg: &DecisionConfig) -> Result<Verdict> {
    let tol = cfg.tol;
    let cf = cf.clone();
    match cf.rank() {
        1 => return decide_rank1(&cf, tol),
        2 => return decide_rank2(&cf, tol),
        _ => {}
    }
    let (pair, commutator_norm) = match diagonalize_family(&cf.u, tol)? {
        FamilyDiagonalization::Diagonalizable(jd) => return decide_rankr_diagonalizable(&cf, &jd, tol),
        FamilyDiagonalization::NotSimultaneouslyDiagonalizable { pair, commutator_norm } => (pair, commutator_norm),
    };

    let all_bk = sufficient_all_bk_psd(&cf, tol);
    if all_bk.preserves() {
        return Ok(proved(&cf, Certificate::AllBkPsd(all_bk)));
    }
    let extremal = if cf.rank() <= cfg.pattern_cap {
        let ev = sufficient_extremal(&cf, tol, cfg.pattern_cap)?;
        if ev.preserves() {
            return Ok(proved(&cf, Certificate::ExtremalEigen(ev)));
        }
        Some(ev)
    } else {
        None
    };

    let fcfg = FalsifierConfig {
        tol,
        ..cfg.falsifier.clone()
    };
    let report = falsify(&cf, &fcfg)?;
    let found = report.found;
    let a = report.best_a.clone();
    let attempts = Attempts {
        non_commuting_pair: pair,
        commutator_norm,
        all_bk_psd: all_bk,
        extremal,
        falsifier: Some(report),
    };
    if found {
        refuted(&cf, a, Certificate::FalsifierFound(attempts), tol)
    } else {
        Ok(Verdict {
            outcome: Outcome::Inconclusive,
            certificate: Certificate::Exhausted(attempts),
            counterexample: None,
            form: Some(cf),
        })
    }
}

/// Decides the map given by a trace form. A form that is already minimal
/// (its rank equals the rank of the map) with a PD image basis is decided in
/// its own basis; anything else goes through [`decide`].
pub fn decide_form(cf: &CanonicalForm, cfg: &DecisionConfig) -> Result<Verdict> {
    let map = cf.to_map();
    if cf.basis_pd_check(cfg.tol) {
        if let Extracted::Form(extracted) = extract(&map, cfg.tol)? {
            if extracted.rank() == cf.rank() {
                let mut own = cf.clone();
                own.basis_is_pd = true;
                return decide_pd_form(&own, cfg);
            }
        }
    }
    decide(&map, cfg)
}

/// Largest deviation of `W U_k Wᵗ` from `diag(lambda[.., k])` over the
/// family.
pub fn joint_residual(u: &[SymMatrix], w: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for (k, uk) in u.iter().enumerate() {
        let d = uk.congruence(w)?;
        worst = worst.max(d.max_offdiag());
        for i in 0..uk.n() {
            worst = worst.max((d.get(i, i) - lambda[(i, k)]).abs());
        }
    }
    Ok(worst)
}
