//! In-process execution of variants: index traces for equivalence checking
//! and timed built-in workloads for tuning.

mod measured;
mod schedule;
mod threads;
mod trace;
mod walk;

pub use measured::{run_measured, BuiltinKernel, Workload};
pub use schedule::{Schedule, ScheduleKind};
pub use threads::{with_threads, ThreadControl, ThreadScope};
pub use trace::{run_trace, run_trace_with, TraceResult};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("thread count must be at least 1, got {0}")]
    InvalidThreads(usize),
    #[error("schedule chunk size must be at least 1")]
    InvalidChunk,
    #[error("iteration count overflows the platform integer range")]
    Overflow,
    #[error("loop '{0}' is empty")]
    EmptyLoop(String),
    #[error("kernel bounds cannot be evaluated")]
    Unevaluable,
    #[error("variant {0} is inconsistent with the kernel")]
    InvalidVariant(u32),
    #[error("unknown built-in kernel '{0}' (available: gkv-like, stream-like)")]
    UnknownKernel(String),
    #[error("{0}")]
    Incompatible(String),
    #[error("allocation failed")]
    Allocation,
}
