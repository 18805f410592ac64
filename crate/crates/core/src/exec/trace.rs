use crate::frontend::Kernel;
use crate::transform::Variant;

use super::schedule::{Schedule, ScheduleKind};
use super::walk::LoopPlan;
use super::ExecError;

/// Index tuples visited by each thread, stored flat with `arity` values per
/// tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceResult {
    pub arity: usize,
    pub per_thread: Vec<Vec<i64>>,
}

impl TraceResult {
    pub fn threads(&self) -> usize {
        self.per_thread.len()
    }

    pub fn tuple_count(&self) -> usize {
        self.per_thread.iter().map(|t| t.len()).sum::<usize>() / self.arity.max(1)
    }

    pub fn thread_tuple_count(&self, k: usize) -> usize {
        self.per_thread[k].len() / self.arity.max(1)
    }

    pub fn thread_tuples(&self, k: usize) -> impl Iterator<Item = &[i64]> + '_ {
        self.per_thread[k].chunks_exact(self.arity.max(1))
    }

    /// All tuples, sorted; equal for two traces iff their multisets agree.
    pub fn flattened_multiset(&self) -> Vec<&[i64]> {
        let mut all: Vec<&[i64]> = (0..self.threads())
            .flat_map(|k| self.thread_tuples(k))
            .collect();
        all.sort_unstable();
        all
    }
}

/// Records the tuples each thread would visit under the default static
/// block schedule.
pub fn run_trace(
    kernel: &Kernel,
    variant: &Variant,
    threads: usize,
) -> Result<TraceResult, ExecError> {
    run_trace_with(kernel, variant, threads, ScheduleKind::Static)
}

pub fn run_trace_with(
    kernel: &Kernel,
    variant: &Variant,
    threads: usize,
    kind: ScheduleKind,
) -> Result<TraceResult, ExecError> {
    if threads == 0 {
        return Err(ExecError::InvalidThreads(0));
    }
    let plan = LoopPlan::new(kernel, variant)?;
    let schedule = Schedule::new(kind, plan.parallel.len(), threads)?;
    let arity = plan.arity;
    let total: u64 = plan.extents.iter().map(|&(_, l)| l).product();
    let mut per_thread: Vec<Vec<i64>> = vec![Vec::new(); threads];
    for (k, buf) in per_thread.iter_mut().enumerate() {
        let share = plan.outer_count() * schedule.thread_iterations(k) * plan.inner_count();
        debug_assert!(share <= total);
        buf.try_reserve_exact(share as usize * arity)
            .map_err(|_| ExecError::Allocation)?;
    }
    let mut tuple = vec![0i64; arity];
    for o in 0..plan.outer_count() {
        plan.assign_outer(o, &mut tuple);
        for (k, buf) in per_thread.iter_mut().enumerate() {
            for range in schedule.thread_chunks(k) {
                plan.run_range(range, &mut tuple, &mut |t: &[i64]| buf.extend_from_slice(t));
            }
        }
    }
    Ok(TraceResult { arity, per_thread })
}
