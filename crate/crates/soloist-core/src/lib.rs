//! Offline trace checking for a metric temporal logic with aggregating
//! modalities (counting, maximum count, average count and average distance
//! over sliding time windows).
//!
//! The crate provides two independent evaluation routes over the same
//! formula/trace types:
//!
//! * [`oracle`] — a direct, sequential implementation of the semantics,
//!   used as ground truth;
//! * [`engine`] — an iterative map-shuffle-reduce pipeline that evaluates
//!   one layer of the subformula lattice per iteration, with a configurable
//!   number of workers and per-iteration tuple metrics.
//!
//! Both produce a [`HoldsSet`]: for every subformula, the sorted set of
//! trace positions where it holds.

pub mod engine;
pub mod formula;
pub mod holds;
pub mod oracle;
pub mod random;
pub mod trace;

pub use engine::{run_check, IterationMetrics, RunConfig, RunResult};
pub use formula::{
    build_table, expand_avg_count, expand_derived, parse_formula, Comparator, Connective,
    Formula, FormulaError, FormulaId, FormulaTable, Interval, ParseError,
};
pub use holds::HoldsSet;
pub use oracle::{eval_at, eval_positions, EvalOutcome};
pub use trace::{
    generate_random_trace, load_trace, timestamp_map, TimestampMap, Trace, TraceEntry, TraceError,
};
