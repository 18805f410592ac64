//! Empirical search over (candidate, thread count).
//!
//! Basic parameters (problem sizes, maximum threads, environment) are fixed;
//! every performance parameter pair in the plan is measured, the median cost
//! per pair is compared, and the cheapest pair is persisted under a stable
//! signature of the basic parameters. At run time the persisted choice is
//! looked up and dispatched, falling back to the baseline at the maximum
//! thread count.

mod dispatch;
mod params;
mod provider;
mod report;
mod select;
mod store;
mod sweep;

pub use dispatch::{dispatch_run, resolve, Dispatch};
pub use params::{BasicParams, PerformanceParams};
pub use provider::{
    CostProvider, MeasuredProvider, ProviderError, SyntheticModel, SyntheticProvider,
};
pub use report::{speedup_rows, variant_summary, SpeedupRow, VariantSummary};
pub use select::{median, select_best};
pub use store::{lookup, persist, StoreError, TuningResult, SCHEMA_VERSION};
pub use sweep::{
    default_ladder, full_ladder, plan_sweep, run_sweep, Measurement, Status, SweepOutcome,
    SweepPlan, DEFAULT_REPS,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TunerError {
    #[error("no variants to tune")]
    NoVariants,
    #[error("no usable thread counts (each must be in 1..={max_threads})")]
    EmptyLadder { max_threads: usize },
    #[error("maximum thread count must be at least 1")]
    InvalidMaxThreads,
    #[error("repetitions must be at least 1")]
    InvalidReps,
    #[error("no successful measurements")]
    NoSuccessfulMeasurements,
}
