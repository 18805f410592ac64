//! Thread-count setting shim, the in-process stand-in for
//! `omp_set_num_threads`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Holds the effective thread setting and logs every change.
#[derive(Debug)]
pub struct ThreadControl {
    current: AtomicUsize,
    max_threads: usize,
    log: Mutex<Vec<usize>>,
}

impl ThreadControl {
    /// Starts at `max_threads`.
    pub fn new(max_threads: usize) -> Self {
        ThreadControl {
            current: AtomicUsize::new(max_threads),
            max_threads,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn max_threads(&self) -> usize {
        self.max_threads
    }

    pub fn current(&self) -> usize {
        self.current.load(Ordering::SeqCst)
    }

    pub fn set_num_threads(&self, n: usize) {
        self.current.store(n, Ordering::SeqCst);
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(n);
    }

    /// Every value passed to [`set_num_threads`](Self::set_num_threads).
    pub fn history(&self) -> Vec<usize> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn clear_history(&self) {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }

    /// Sets `n` threads until the returned guard drops, then restores the
    /// maximum. The restore also runs on early return and unwinding.
    pub fn scope(&self, n: usize) -> ThreadScope<'_> {
        self.set_num_threads(n);
        ThreadScope { control: self }
    }
}

#[must_use = "the thread count is restored when the scope drops"]
#[derive(Debug)]
pub struct ThreadScope<'a> {
    control: &'a ThreadControl,
}

impl ThreadScope<'_> {
    pub fn threads(&self) -> usize {
        self.control.current()
    }
}

impl Drop for ThreadScope<'_> {
    fn drop(&mut self) {
        self.control.set_num_threads(self.control.max_threads);
    }
}

/// Runs `body` as a candidate: thread count set to `threads` on entry and
/// restored to the maximum on every exit path. `body` receives the effective
/// setting.
pub fn with_threads<R>(
    control: &ThreadControl,
    threads: usize,
    body: impl FnOnce(usize) -> R,
) -> R {
    let scope = control.scope(threads);
    body(scope.threads())
}
