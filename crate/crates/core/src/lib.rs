//! Evaluation toolkit for LLM inference serving.
//!
//! * [`model`]: request specs, token timelines and run records.
//! * [`metrics`]: TTFT, TTLT, TBT, TPOT, normalized latency, fluidity index.
//! * [`workload`]: JSONL traces, synthetic profiles and arrival processes.
//! * [`sim`]: deterministic serving simulator.
//! * [`deadline`]: prefill profiling and per-request deadlines.
//! * [`slo`] and [`search`]: SLO attainment, capacity and fluid-rate searches.
//! * [`report`]: aggregation, lints, comparisons and exports.

pub mod deadline;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod search;
pub mod sim;
pub mod slo;
pub mod workload;

pub use metrics::{DeadlineSpec, DistributionSummary, RequestMetrics};
pub use model::{FinishReason, RequestSpec, RunRecord, TokenTimeline};
