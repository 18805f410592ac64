use std::ops::Range;

use super::ExecError;

/// How parallel-loop iterations are dealt to threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleKind {
    /// One contiguous block per thread, the first `n mod t` blocks one
    /// iteration longer.
    #[default]
    Static,
    /// Fixed-size chunks handed out round-robin, like `schedule(static, c)`.
    StaticChunk(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub parallel_length: u64,
    pub threads: usize,
    /// Contiguous, ordered, disjoint ranges covering `0..parallel_length`.
    pub chunks: Vec<Range<u64>>,
    /// Thread executing each chunk.
    pub owners: Vec<usize>,
}

impl Schedule {
    pub fn new(
        kind: ScheduleKind,
        parallel_length: u64,
        threads: usize,
    ) -> Result<Self, ExecError> {
        if threads == 0 {
            return Err(ExecError::InvalidThreads(threads));
        }
        match kind {
            ScheduleKind::Static => Ok(Self::block(parallel_length, threads)),
            ScheduleKind::StaticChunk(0) => Err(ExecError::InvalidChunk),
            ScheduleKind::StaticChunk(c) => {
                let mut chunks = Vec::new();
                let mut owners = Vec::new();
                let mut begin = 0;
                while begin < parallel_length {
                    let end = (begin + c).min(parallel_length);
                    owners.push(chunks.len() % threads);
                    chunks.push(begin..end);
                    begin = end;
                }
                Ok(Schedule {
                    parallel_length,
                    threads,
                    chunks,
                    owners,
                })
            }
        }
    }

    /// Static block schedule; `threads` must be at least 1.
    pub fn block(n: u64, threads: usize) -> Self {
        assert!(threads >= 1);
        let t = threads as u64;
        let base = n / t;
        let extra = n % t;
        let mut chunks = Vec::with_capacity(threads);
        let mut begin = 0;
        for k in 0..t {
            let size = base + u64::from(k < extra);
            chunks.push(begin..begin + size);
            begin += size;
        }
        Schedule {
            parallel_length: n,
            threads,
            chunks,
            owners: (0..threads).collect(),
        }
    }

    /// Chunks executed by thread `k`, in iteration order.
    pub fn thread_chunks(&self, k: usize) -> impl Iterator<Item = Range<u64>> + '_ {
        self.chunks
            .iter()
            .zip(&self.owners)
            .filter(move |(_, &o)| o == k)
            .map(|(r, _)| r.clone())
    }

    pub fn thread_iterations(&self, k: usize) -> u64 {
        self.thread_chunks(k).map(|r| r.end - r.start).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_invariants_exhaustive() {
        for n in 1..=1000u64 {
            for t in 1..=1000usize {
                let s = Schedule::block(n, t);
                assert_eq!(s.chunks.len(), t);
                assert_eq!(s.chunks[0].start, 0);
                assert_eq!(s.chunks[t - 1].end, n);
                let ceil = n.div_ceil(t as u64);
                let floor = n / t as u64;
                let extra = (n % t as u64) as usize;
                for (k, c) in s.chunks.iter().enumerate() {
                    if k > 0 {
                        assert_eq!(s.chunks[k - 1].end, c.start);
                    }
                    let size = c.end - c.start;
                    assert_eq!(
                        size,
                        if k < extra { ceil } else { floor },
                        "n={n} t={t} k={k}"
                    );
                }
                if t as u64 > n {
                    let singles = s.chunks.iter().filter(|c| c.end - c.start == 1).count();
                    assert_eq!(singles as u64, n);
                    let empties = s.chunks.iter().filter(|c| c.is_empty()).count();
                    assert_eq!(empties as u64, t as u64 - n);
                }
            }
        }
    }

    #[test]
    fn sixteen_over_five() {
        let s = Schedule::block(16, 5);
        let sizes: Vec<u64> = (0..5).map(|k| s.thread_iterations(k)).collect();
        assert_eq!(sizes, vec![4, 3, 3, 3, 3]);
    }

    #[test]
    fn chunked_round_robin() {
        let s = Schedule::new(ScheduleKind::StaticChunk(2), 7, 2).unwrap();
        assert_eq!(s.chunks, vec![0..2, 2..4, 4..6, 6..7]);
        assert_eq!(s.thread_chunks(1).collect::<Vec<_>>(), vec![2..4, 6..7]);
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(Schedule::new(ScheduleKind::Static, 4, 0).is_err());
    }
}
