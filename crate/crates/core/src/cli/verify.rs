//! Independent re-verification of decide / falsify reports.
//!
//! Every claim is recomputed from the report's map and trace form using
//! only symmetric-matrix and congruence primitives; the decision engine is
//! not consulted.

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Serialize};
use serde_json::Value;

use crate::canonical::{CanonicalForm, LinearMapOnSym};
use crate::congruence::{diagonalize_family, diagonalize_pair, FamilyDiagonalization};
use crate::decide::{
    diagonal_witnesses, joint_residual, sufficient_all_bk_psd, sufficient_extremal, Attempts, Certificate,
};
use crate::falsify::is_violation;
use crate::serde_rows;
use crate::symmat::{linear_combination, SymMatrix};

/// Relative slack for recomputed floating-point quantities.
const RECHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.0.push(Check {
            name: name.to_string(),
            ok,
            detail: detail.into(),
        });
    }
}

fn field<T: DeserializeOwned>(report: &Value, key: &str) -> Result<T, String> {
    let v = report.get(key).ok_or_else(|| format!("report has no \"{key}\""))?;
    serde_json::from_value(v.clone()).map_err(|e| format!("bad \"{key}\": {e}"))
}

fn optional<T: DeserializeOwned>(report: &Value, key: &str) -> Result<Option<T>, String> {
    match report.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(_) => field(report, key).map(Some),
    }
}

pub fn verify_report(report: &Value) -> Result<Vec<Check>, String> {
    let command: String = field(report, "command")?;
    let n: usize = field(report, "n")?;
    let tol: f64 = field(report, "tol")?;
    let rows: Vec<Vec<f64>> = field(report, "map")?;
    let map = LinearMapOnSym::new(n, serde_rows::to_matrix(&rows)?).map_err(|e| e.to_string())?;
    let form: Option<CanonicalForm> = optional(report, "canonical")?;
    let counterexample: Option<SymMatrix> = optional(report, "counterexample")?;

    let mut checks = Checks(Vec::new());
    if let Some(cf) = &form {
        check_form(&mut checks, &map, cf, tol);
    }
    if let Some(a) = &counterexample {
        check_counterexample(&mut checks, &map, a, tol);
    }

    match command.as_str() {
        "decide" => {
            let outcome: String = field(report, "outcome")?;
            let certificate: Certificate = field(report, "certificate")?;
            check_decision(&mut checks, &outcome, &certificate, form.as_ref(), counterexample.as_ref(), &map, tol);
        }
        "falsify" => {
            let found: bool = field(report, "found")?;
            checks.push(
                "found flag matches counterexample",
                found == counterexample.is_some(),
                format!("found = {found}"),
            );
        }
        other => return Err(format!("cannot verify a \"{other}\" report")),
    }
    Ok(checks.0)
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn check_form(checks: &mut Checks, map: &LinearMapOnSym, cf: &CanonicalForm, tol: f64) {
    if cf.n != map.n() {
        checks.push("trace form dimension", false, format!("form n = {}, map n = {}", cf.n, map.n()));
        return;
    }
    let err = rel_err(cf.to_map().matrix(), map.matrix());
    checks.push(
        "trace form reproduces map",
        err <= RECHECK_TOL,
        format!("relative residual {err:e}"),
    );
    if cf.basis_is_pd {
        let bad: Vec<usize> = (0..cf.rank()).filter(|&k| !cf.u[k].classify(tol).is_pd()).collect();
        checks.push("image basis positive definite", bad.is_empty(), format!("non-PD members: {bad:?}"));
    }
}

fn check_counterexample(checks: &mut Checks, map: &LinearMapOnSym, a: &SymMatrix, tol: f64) {
    let a_class = a.classify(tol);
    checks.push(
        "counterexample positive definite",
        a_class.is_pd(),
        format!("λ_min(A) = {:e}", a_class.min_eigenvalue),
    );
    match map.apply(a) {
        Ok(image) => {
            let c = image.classify(tol);
            checks.push(
                "image of counterexample not positive definite",
                !c.is_pd() && is_violation(a, &image, tol),
                format!("λ_min(T(A)) = {:e} ({:?})", c.min_eigenvalue, c.class),
            );
        }
        Err(e) => checks.push("image of counterexample not positive definite", false, e.to_string()),
    }
}

fn pd_basis(checks: &mut Checks, cf: &CanonicalForm, tol: f64) {
    let ok = cf.basis_pd_check(tol);
    checks.push("hypothesis: U_k positive definite", ok, format!("rank {}", cf.rank()));
}

fn check_decision(
    checks: &mut Checks,
    outcome: &str,
    cert: &Certificate,
    form: Option<&CanonicalForm>,
    counterexample: Option<&SymMatrix>,
    map: &LinearMapOnSym,
    tol: f64,
) {
    match outcome {
        "NotPreserving" => {
            checks.push("refutation carries a counterexample", counterexample.is_some(), "");
            if let Certificate::TIdentityFails { zero_map, t_identity } = cert {
                let n = map.n();
                let recomputed = map.apply(&SymMatrix::identity(n));
                let ok = recomputed
                    .as_ref()
                    .map(|p| rel_err(p.as_matrix(), t_identity.as_matrix()) <= RECHECK_TOL && !p.classify(tol).is_pd())
                    .unwrap_or(false);
                checks.push("T(I) recorded and not positive definite", ok, format!("zero map: {zero_map}"));
            }
        }
        "Preserves" => {
            let Some(cf) = form else {
                checks.push("preservation claim has a trace form", false, "missing \"canonical\"");
                return;
            };
            check_preserves(checks, cert, cf, tol);
        }
        "Inconclusive" => {
            let Some(cf) = form else {
                checks.push("inconclusive claim has a trace form", false, "missing \"canonical\"");
                return;
            };
            match cert {
                Certificate::Exhausted(att) => check_exhausted(checks, att, cf, map, tol),
                other => checks.push("inconclusive certificate", false, format!("unexpected rule {:?}", other.rule())),
            }
        }
        other => checks.push("outcome", false, format!("unknown outcome {other:?}")),
    }
}

fn check_preserves(checks: &mut Checks, cert: &Certificate, cf: &CanonicalForm, tol: f64) {
    pd_basis(checks, cf, tol);
    match cert {
        Certificate::Rank1 { .. } => {
            checks.push("rank is 1", cf.rank() == 1, format!("rank {}", cf.rank()));
            if cf.rank() == 1 {
                let c = cf.b[0].classify(tol);
                checks.push("B_1 nonzero PSD", c.is_nonzero_psd(), format!("{:?}", c.class));
            }
        }
        Certificate::Rank2 { pair, .. } => {
            checks.push("rank is 2", cf.rank() == 2, format!("rank {}", cf.rank()));
            if cf.rank() != 2 {
                return;
            }
            let n = cf.n;
            let wu1 = cf.u[0].congruence(&pair.w);
            let wu2 = cf.u[1].congruence(&pair.w);
            let ok = match (wu1, wu2) {
                (Ok(a), Ok(b)) => {
                    rel_err(a.as_matrix(), &DMatrix::identity(n, n)) <= RECHECK_TOL
                        && rel_err(b.as_matrix(), SymMatrix::diagonal(&pair.mu).as_matrix()) <= RECHECK_TOL
                }
                _ => false,
            };
            checks.push("W U_1 Wᵗ = I and W U_2 Wᵗ = diag(μ)", ok, format!("μ = {:?}", pair.mu));
            match diagonalize_pair(&cf.u[0], &cf.u[1], tol) {
                Ok(fresh) => {
                    let scale = fresh.mu.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                    let diff = fresh
                        .mu
                        .iter()
                        .zip(&pair.mu)
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    checks.push(
                        "μ equals recomputed eigenvalues of U_1⁻¹U_2",
                        fresh.mu.len() == pair.mu.len() && diff <= RECHECK_TOL * scale,
                        format!("max deviation {diff:e}"),
                    );
                }
                Err(e) => checks.push("μ equals recomputed eigenvalues of U_1⁻¹U_2", false, e.to_string()),
            }
            for (label, mu) in [("B_1 + μ_min B_2 nonzero PSD", pair.mu_min()), ("B_1 + μ_max B_2 nonzero PSD", pair.mu_max())] {
                let ok = linear_combination(&[1.0, mu], &cf.b)
                    .map(|g| g.classify(tol).is_nonzero_psd())
                    .unwrap_or(false);
                checks.push(label, ok, format!("μ = {mu:e}"));
            }
        }
        Certificate::RankRDiagonalizable { diagonalization: jd, .. } => {
            checks.push(
                "λ table matches rank",
                jd.r() == cf.rank() && jd.n() == cf.n,
                format!("table {}×{}", jd.n(), jd.r()),
            );
            if jd.r() != cf.rank() || jd.n() != cf.n {
                return;
            }
            let scale = jd.lambda.amax().max(1.0);
            let res = joint_residual(&cf.u, &jd.w, &jd.lambda).unwrap_or(f64::INFINITY);
            checks.push(
                "W U_k Wᵗ = diag(λ_·k) for all k",
                res <= RECHECK_TOL * scale,
                format!("max residual {res:e}"),
            );
            let positive = jd.lambda.iter().all(|&x| x > 0.0);
            checks.push("λ table positive (W invertible)", positive, "");
            match diagonal_witnesses(cf, jd, tol) {
                Ok(g) => {
                    let bad: Vec<usize> = (0..g.len()).filter(|&i| !g[i].is_nonzero_psd()).collect();
                    checks.push("every G_i = Σ λ_ik B_k nonzero PSD", bad.is_empty(), format!("failing rows {bad:?}"));
                }
                Err(e) => checks.push("every G_i = Σ λ_ik B_k nonzero PSD", false, e.to_string()),
            }
        }
        Certificate::AllBkPsd(_) => {
            let ev = sufficient_all_bk_psd(cf, tol);
            checks.push("every B_k nonzero PSD", ev.preserves(), format!("first failing {:?}", ev.failing));
        }
        Certificate::ExtremalEigen(_) => match sufficient_extremal(cf, tol, usize::MAX) {
            Ok(ev) => checks.push(
                "every extreme-eigenvalue pattern nonzero PSD",
                ev.preserves(),
                format!("{} patterns, first failing {:?}", ev.patterns.len(), ev.failing),
            ),
            Err(e) => checks.push("every extreme-eigenvalue pattern nonzero PSD", false, e.to_string()),
        },
        other => checks.push("rule certifies preservation", false, format!("{:?} cannot prove preservation", other.rule())),
    }
}

fn check_exhausted(checks: &mut Checks, att: &Attempts, cf: &CanonicalForm, map: &LinearMapOnSym, tol: f64) {
    checks.push("no exact test for rank", cf.rank() >= 3, format!("rank {}", cf.rank()));
    let not_diag = matches!(
        diagonalize_family(&cf.u, tol),
        Ok(FamilyDiagonalization::NotSimultaneouslyDiagonalizable { .. })
    );
    checks.push(
        "image basis not simultaneously diagonalizable",
        not_diag,
        format!("reported pair {:?}", att.non_commuting_pair),
    );
    checks.push("all-B_k-PSD test fails", !sufficient_all_bk_psd(cf, tol).preserves(), "");
    if att.extremal.is_some() {
        let fails = sufficient_extremal(cf, tol, usize::MAX).map(|e| !e.preserves()).unwrap_or(false);
        checks.push("extreme-eigenvalue test fails", fails, "");
    }
    if let Some(rep) = &att.falsifier {
        checks.push("falsifier reported no violation", !rep.found, "");
        match map.apply(&rep.best_a) {
            Ok(image) => {
                let v = image.min_eigenvalue();
                let scale = image.eigenvalues().iter().fold(1.0f64, |m, x| m.max(x.abs()));
                checks.push(
                    "falsifier best value recomputes",
                    (v - rep.best_value).abs() <= RECHECK_TOL * scale,
                    format!("reported {:e}, recomputed {v:e}", rep.best_value),
                );
            }
            Err(e) => checks.push("falsifier best value recomputes", false, e.to_string()),
        }
    }
}
