//! Hierarchy of representative layers and the progressive descent through it.

pub mod hierarchy;
pub mod neighbor;
pub mod pipeline;

pub use hierarchy::{layer_count, smallest_gap, Hierarchy, HierarchyError, Layer};
pub use neighbor::{neighbor_sampling, random_sampling, Expansion};
pub use pipeline::{progressive_shading, trace_lines, Augment, LayerTrace, ShadingConfig, ShadingError, ShadingResult};
