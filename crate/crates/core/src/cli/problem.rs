//! Problem file parsing and validation.
//!
//! ```json
//! { "n": 2,
//!   "map": [[...], [...], [...]],          // N×N rows acting on svec coordinates
//!   "canonical": { "B": [...], "U": [...] }, // or: lists of n×n matrices
//!   "matrices": [...],                      // or: bare matrix list (diagonalize)
//!   "tol": 1e-9, "seed": 0 }
//! ```
//!
//! Exactly one of `map`, `canonical`, `matrices` must be present. The svec
//! ordering is `(1,1), (1,2), …, (1,n), (2,2), (2,3), …, (n,n)` with
//! off-diagonal coordinates scaled by √2.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::canonical::{CanonicalForm, LinearMapOnSym};
use crate::symmat::{packed_len, SymMatrix};

/// Asymmetry allowed (relative to `max(1, max |entry|)`) before a matrix is
/// rejected; anything below is symmetrized with a warning.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMatrix {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCanonical {
    #[serde(rename = "B", alias = "b")]
    b: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "U", alias = "u")]
    u: Vec<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    n: usize,
    map: Option<RawMatrix>,
    canonical: Option<RawCanonical>,
    matrices: Option<Vec<Vec<Vec<f64>>>>,
    tol: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub enum ProblemKind {
    Map(LinearMapOnSym),
    Canonical(CanonicalForm),
    Matrices(Vec<SymMatrix>),
}

#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub n: usize,
    pub kind: ProblemKind,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub warnings: Vec<String>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let raw: RawProblem = serde_json::from_str(text).map_err(|e| format!("malformed problem file: {e}"))?;
        let n = raw.n;
        if n == 0 {
            return Err("n must be at least 1".into());
        }
        if let Some(tol) = raw.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(format!("tol must be positive, got {tol}"));
            }
        }
        let present = [raw.map.is_some(), raw.canonical.is_some(), raw.matrices.is_some()]
            .iter()
            .filter(|&&p| p)
            .count();
        if present != 1 {
            return Err("exactly one of \"map\", \"canonical\", \"matrices\" must be present".into());
        }
        let mut warnings = Vec::new();
        let kind = if let Some(map) = raw.map {
            ProblemKind::Map(parse_map(n, map)?)
        } else if let Some(c) = raw.canonical {
            if c.b.len() != c.u.len() || c.b.is_empty() {
                return Err("canonical B and U must be nonempty lists of equal length".into());
            }
            let b = parse_sym_list(n, &c.b, "B", &mut warnings)?;
            let u = parse_sym_list(n, &c.u, "U", &mut warnings)?;
            ProblemKind::Canonical(CanonicalForm::new(b, u).map_err(|e| e.to_string())?)
        } else {
            let mats = raw.matrices.expect("counted above");
            if mats.is_empty() {
                return Err("matrices must be a nonempty list".into());
            }
            ProblemKind::Matrices(parse_sym_list(n, &mats, "matrices", &mut warnings)?)
        };
        Ok(Self {
            n,
            kind,
            tol: raw.tol,
            seed: raw.seed,
            warnings,
        })
    }

    /// The map described by the file (`None` for a bare matrix list).
    pub fn to_map(&self) -> Option<LinearMapOnSym> {
        match &self.kind {
            ProblemKind::Map(t) => Some(t.clone()),
            ProblemKind::Canonical(cf) => Some(cf.to_map()),
            ProblemKind::Matrices(_) => None,
        }
    }
}

fn parse_map(n: usize, raw: RawMatrix) -> Result<LinearMapOnSym, String> {
    let big_n = packed_len(n);
    let m = match raw {
        RawMatrix::Rows(rows) => {
            if rows.len() != big_n || rows.iter().any(|r| r.len() != big_n) {
                return Err(format!("map must be {big_n}×{big_n} for n = {n}"));
            }
            DMatrix::from_fn(big_n, big_n, |i, j| rows[i][j])
        }
        RawMatrix::Flat(v) => {
            if v.len() != big_n * big_n {
                return Err(format!("flat map must have {} entries for n = {n}", big_n * big_n));
            }
            DMatrix::from_row_slice(big_n, big_n, &v)
        }
    };
    LinearMapOnSym::new(n, m).map_err(|e| e.to_string())
}

fn parse_sym_list(n: usize, mats: &[Vec<Vec<f64>>], label: &str, warnings: &mut Vec<String>) -> Result<Vec<SymMatrix>, String> {
    mats.iter()
        .enumerate()
        .map(|(k, rows)| parse_sym(n, rows, &format!("{label}[{k}]"), warnings))
        .collect()
}

fn parse_sym(n: usize, rows: &[Vec<f64>], label: &str, warnings: &mut Vec<String>) -> Result<SymMatrix, String> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(format!("{label} must be {n}×{n}"));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(format!("{label} has non-finite entries"));
    }
    let scale = rows.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let asym = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max((rows[i][j] - rows[j][i]).abs()));
    if asym > SYMMETRY_TOL * scale {
        return Err(format!("{label} is not symmetric (max asymmetry {asym:e})"));
    }
    if asym > 0.0 {
        warnings.push(format!("{label} symmetrized (max asymmetry {asym:e})"));
    }
    SymMatrix::from_rows(rows).map_err(|e| format!("{label}: {e}"))
}
