//! Dense bounded-variable LP solving for package-query relaxations.

pub mod basis;
pub mod bfrt;
pub mod dual;
pub mod pricing;
pub mod standard;
pub mod support;

pub use bfrt::{choose_variant, BfrtInstance, BfrtSelection, BfrtVariant};
pub use dual::{dual_simplex_solve, dual_simplex_warm, BasisSnapshot, BasisState, LpOptions, LpSolution, LpStatus};
pub use standard::{to_standard_form, StandardFormLp};

use crate::model::NormalizedQuery;

/// Solves the LP relaxation of `nq` from scratch.
pub fn solve_relaxation(nq: &NormalizedQuery, opts: &LpOptions) -> LpSolution {
    dual_simplex_solve(&to_standard_form(nq), opts)
}
