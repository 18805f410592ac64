//! The transformed loop structure of a variant, executed directly.
//!
//! Loops before the directive depth run sequentially; the parallel loop is
//! split by a [`Schedule`](super::Schedule); loops inside it run in order. A
//! fused loop assigns its original indices through the variant's recovery
//! expressions, exactly as the emitted code does.

use crate::frontend::Kernel;
use crate::transform::Variant;

use super::ExecError;

#[derive(Debug, Clone)]
pub(crate) enum Level {
    Regular {
        slot: usize,
        lower: i64,
        len: u64,
    },
    Fused {
        len: u64,
        /// (slot, stride, modulus, offset)
        members: Vec<(usize, u64, u64, i64)>,
    },
}

impl Level {
    #[inline]
    pub(crate) fn len(&self) -> u64 {
        match self {
            Level::Regular { len, .. } | Level::Fused { len, .. } => *len,
        }
    }

    /// Assigns the original indices for 0-based position `p` of this loop.
    #[inline]
    pub(crate) fn assign(&self, p: u64, tuple: &mut [i64]) {
        match self {
            Level::Regular { slot, lower, .. } => tuple[*slot] = lower + p as i64,
            Level::Fused { members, .. } => {
                let f = p + 1;
                for &(slot, stride, modulus, offset) in members {
                    tuple[slot] = (((f - 1) / stride) % modulus) as i64 + offset;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LoopPlan {
    pub arity: usize,
    /// Original loops: (lower, length).
    pub extents: Vec<(i64, u64)>,
    pub outer: Vec<Level>,
    pub parallel: Level,
    pub inner: Vec<Level>,
}

impl LoopPlan {
    pub(crate) fn new(kernel: &Kernel, variant: &Variant) -> Result<Self, ExecError> {
        let extents = kernel.extents().ok_or(ExecError::Unevaluable)?;
        let mut ext = Vec::with_capacity(extents.len());
        for (h, &(lo, len)) in kernel.nest.iter().zip(&extents) {
            if len < 1 {
                return Err(ExecError::EmptyLoop(h.index.clone()));
            }
            ext.push((lo, len as u64));
        }
        extents
            .iter()
            .try_fold(1u64, |acc, &(_, l)| acc.checked_mul(l as u64))
            .filter(|&t| t <= i64::MAX as u64 && usize::try_from(t).is_ok())
            .ok_or(ExecError::Overflow)?;

        let c = &variant.collapse;
        let post = c.start_depth;
        let d = variant.directive_depth;
        if d == 0 || d > post {
            return Err(ExecError::InvalidVariant(variant.id));
        }
        let mut levels = Vec::with_capacity(post);
        for (slot, &(lower, len)) in ext.iter().enumerate().take(post - 1) {
            levels.push(Level::Regular { slot, lower, len });
        }
        if c.is_identity() {
            let slot = kernel.depth() - 1;
            levels.push(Level::Regular {
                slot,
                lower: ext[slot].0,
                len: ext[slot].1,
            });
        } else {
            let mut members = Vec::with_capacity(variant.recovery.len());
            for r in &variant.recovery {
                let slot = kernel
                    .nest
                    .iter()
                    .position(|h| h.index == r.target)
                    .ok_or(ExecError::InvalidVariant(variant.id))?;
                if r.stride == 0 || r.modulus == 0 {
                    return Err(ExecError::InvalidVariant(variant.id));
                }
                members.push((slot, r.stride, r.modulus, r.offset));
            }
            levels.push(Level::Fused {
                len: c.fused_length,
                members,
            });
        }
        let inner = levels.split_off(d);
        let parallel = levels.pop().expect("d >= 1");
        Ok(LoopPlan {
            arity: kernel.depth(),
            extents: ext,
            outer: levels,
            parallel,
            inner,
        })
    }

    /// Number of executions of the parallel loop.
    pub(crate) fn outer_count(&self) -> u64 {
        self.outer.iter().map(Level::len).product()
    }

    /// Iterations inside one parallel-loop iteration.
    pub(crate) fn inner_count(&self) -> u64 {
        self.inner.iter().map(Level::len).product()
    }

    /// Sets outer loop indices for the `o`-th parallel-loop execution.
    pub(crate) fn assign_outer(&self, mut o: u64, tuple: &mut [i64]) {
        for level in self.outer.iter().rev() {
            let len = level.len();
            level.assign(o % len, tuple);
            o /= len;
        }
    }

    /// Runs parallel-loop positions `range` with the outer indices already
    /// set, calling `visit` for every full index tuple in order.
    #[inline]
    pub(crate) fn run_range<F: FnMut(&[i64])>(
        &self,
        range: std::ops::Range<u64>,
        tuple: &mut [i64],
        visit: &mut F,
    ) {
        for p in range {
            self.parallel.assign(p, tuple);
            walk(&self.inner, tuple, visit);
        }
    }
}

#[inline]
fn walk<F: FnMut(&[i64])>(levels: &[Level], tuple: &mut [i64], visit: &mut F) {
    match levels {
        [] => visit(tuple),
        [last] => {
            for p in 0..last.len() {
                last.assign(p, tuple);
                visit(tuple);
            }
        }
        [first, rest @ ..] => {
            for p in 0..first.len() {
                first.assign(p, tuple);
                walk(rest, tuple, visit);
            }
        }
    }
}
