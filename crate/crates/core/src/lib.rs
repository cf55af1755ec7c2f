//! Decide whether a linear map on real symmetric matrices sends positive
//! definite matrices to positive definite matrices.
//!
//! A map `T: S_n → S_n` of rank `r` is brought into the trace form
//! `T(A) = Σ_k tr(A B_k) U_k` with a positive definite image basis `U_k`
//! ([`canonical`]). Exact tests then apply for rank one and two, and for any
//! rank when the `U_k` are simultaneously diagonalizable by congruence
//! ([`congruence`], [`decide`]). Otherwise two sufficient tests and a
//! counterexample search ([`falsify`]) are tried. Every verdict carries a
//! certificate that can be re-checked independently.

pub mod canonical;
pub mod cli;
pub mod congruence;
pub mod decide;
pub mod error;
pub mod falsify;
mod serde_rows;
pub mod symmat;

pub use canonical::{CanonicalForm, LinearMapOnSym};
pub use decide::{decide, Certificate, DecisionConfig, Outcome, Verdict};
pub use error::{Error, Result};
pub use symmat::{Definiteness, PsdClass, SymMatrix};
