use std::path::Path;
use std::time::Duration;

use crate::exec::{with_threads, ExecError, ThreadControl, Workload};
use crate::transform::Enumeration;

use super::params::{BasicParams, PerformanceParams};
use super::store::{lookup, StoreError};

/// Run-time choice of configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dispatch {
    pub pp: PerformanceParams,
    /// False when falling back to the baseline.
    pub tuned: bool,
}

impl Dispatch {
    pub fn baseline(enumeration: &Enumeration, max_threads: usize) -> Self {
        Dispatch {
            pp: PerformanceParams {
                variant_id: enumeration.baseline().id,
                threads: max_threads,
            },
            tuned: false,
        }
    }
}

/// Looks up the stored choice for `bp`. Absent results, or results naming
/// a variant or thread count that no longer applies, fall back to the
/// baseline at the maximum thread count.
pub fn resolve(
    store: &Path,
    bp: &BasicParams,
    enumeration: &Enumeration,
) -> Result<Dispatch, StoreError> {
    let fallback = Dispatch::baseline(enumeration, bp.max_threads);
    let Some(result) = lookup(&bp.signature(), store)? else {
        return Ok(fallback);
    };
    let pp = result.best;
    if enumeration.by_id(pp.variant_id).is_none() || pp.threads == 0 || pp.threads > bp.max_threads
    {
        return Ok(fallback);
    }
    Ok(Dispatch { pp, tuned: true })
}

/// Executes the dispatched variant once under a thread set/restore.
pub fn dispatch_run(
    control: &ThreadControl,
    workload: &mut Workload,
    enumeration: &Enumeration,
    dispatch: &Dispatch,
) -> Result<Duration, ExecError> {
    let v = enumeration
        .by_id(dispatch.pp.variant_id)
        .ok_or(ExecError::InvalidVariant(dispatch.pp.variant_id))?;
    with_threads(control, dispatch.pp.threads, |t| workload.run_once(v, t))
}
