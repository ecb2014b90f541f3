//! Hardness-calibrated package-query benchmarks.

pub mod datasets;
pub mod hardness;
pub mod suite;

pub use datasets::{generate_relation, AttributeSpec, Dataset, DatasetError, Family, Template};
pub use hardness::{derive_bounds, implied_hardness, satisfaction_probability, Bound, ConstraintSpec, Direction, HardnessError, HardnessSpec};
pub use suite::{fan_seed, run_suite, summarize, without_timing, write_csv, BenchRow, Method, SuiteConfig, SuiteError, SummaryEntry};
