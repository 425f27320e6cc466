//! The iterative map-shuffle-reduce evaluation pipeline.

pub mod pipeline;
pub mod reduce;
pub mod tuples;

pub use pipeline::{run_check, run_check_with, IterationMetrics, RunConfig, RunResult};
pub use tuples::{input_reader, map_lift, shuffle, CompositeKey, Group, IntermediateTuple, Tuple};
