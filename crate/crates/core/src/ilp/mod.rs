//! Integer solving: exact branch and bound and the Dual Reducer heuristic.

pub mod bnb;
pub mod reducer;
pub mod repair;

pub use bnb::{branch_and_bound, BnbOptions, BnbResult, IlpInstance};
pub use repair::repair;
pub use reducer::{dual_reducer, AugmentMode, DrDiagnostics, DualReducerConfig};
