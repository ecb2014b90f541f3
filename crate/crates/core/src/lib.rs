//! Package-query evaluation: data model, LP and ILP solvers, variance-bounded
//! partitioning and the layered candidate-reduction pipeline.

pub mod ilp;
pub mod lp;
pub mod model;
pub mod partition;
pub mod shading;
pub mod stats;

pub use model::{
    check_feasible, integrality_gap, normalize_query, Aggregate, GlobalConstraint, NormalizedQuery, PackageQuery,
    PackageSolution, QueryModel, Relation, Repeat, Sense, SolveStatus,
};
