//! Built-in workloads timed with real worker threads.
//!
//! Workers are spawned once per timed execution and each runs its own
//! chunks of every parallel-loop execution, writing a disjoint part of the
//! output. No synchronization happens inside the timed region.

use std::fmt;
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::frontend::Kernel;
use crate::transform::Variant;

use super::schedule::Schedule;
use super::threads::{with_threads, ThreadControl};
use super::walk::LoopPlan;
use super::ExecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinKernel {
    /// Complex E x B product over a 4-deep `(iv, iz, mx, my)` nest.
    GkvLike,
    /// `out = a + s * b` over a nest of any depth.
    StreamLike,
}

impl BuiltinKernel {
    pub const ALL: [BuiltinKernel; 2] = [BuiltinKernel::GkvLike, BuiltinKernel::StreamLike];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinKernel::GkvLike => "gkv-like",
            BuiltinKernel::StreamLike => "stream-like",
        }
    }

    /// Kernel file shipped with the built-in.
    pub fn source(self) -> &'static str {
        match self {
            BuiltinKernel::GkvLike => include_str!("../../kernels/exb_realspcal.oat"),
            BuiltinKernel::StreamLike => include_str!("../../kernels/stream.oat"),
        }
    }
}

impl fmt::Display for BuiltinKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinKernel {
    type Err = ExecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuiltinKernel::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| ExecError::UnknownKernel(s.to_string()))
    }
}

// splitmix64, mapped to [-1, 1)
fn fill_value(seed: u64, i: u64) -> f64 {
    let mut z = seed.wrapping_add(i.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn alloc<T: Clone>(n: usize, value: T) -> Result<Vec<T>, ExecError> {
    let mut v = Vec::new();
    v.try_reserve_exact(n).map_err(|_| ExecError::Allocation)?;
    v.resize(n, value);
    Ok(v)
}

fn complex_array(n: usize, seed: u64) -> Result<Vec<Complex64>, ExecError> {
    let mut v = alloc(n, Complex64::new(0.0, 0.0))?;
    for (i, x) in v.iter_mut().enumerate() {
        let i = i as u64;
        *x = Complex64::new(fill_value(seed, 2 * i), fill_value(seed, 2 * i + 1));
    }
    Ok(v)
}

fn real_array(n: usize, seed: u64) -> Result<Vec<f64>, ExecError> {
    let mut v = alloc(n, 0.0)?;
    for (i, x) in v.iter_mut().enumerate() {
        *x = fill_value(seed, i as u64);
    }
    Ok(v)
}

struct GkvInputs {
    df1: Vec<Complex64>,
    df2: Vec<Complex64>,
    ey: Vec<Complex64>,
    by: Vec<Complex64>,
    ex: Vec<Complex64>,
    bx: Vec<Complex64>,
    vl: Vec<f64>,
    cs1: f64,
    cef: f64,
}

impl GkvInputs {
    #[inline]
    fn compute(&self, lin: usize, plane: usize, iv: usize) -> Complex64 {
        let df1 = self.df1[lin];
        let df2 = self.df2[lin];
        let scale = self.cs1 * self.vl[iv];
        let y = self.ey[plane] - self.by[plane] * scale;
        let x = self.ex[plane] - self.bx[plane] * scale;
        Complex64::new(df1.re * y.re - df2.re * x.re, df1.im * y.im - df2.im * x.im) * self.cef
    }
}

struct StreamInputs {
    a: Vec<f64>,
    b: Vec<f64>,
    s: f64,
}

enum Data {
    Gkv {
        inputs: GkvInputs,
        out: Vec<Complex64>,
    },
    Stream {
        inputs: StreamInputs,
        out: Vec<f64>,
    },
}

/// Allocated arrays for one built-in kernel at the sizes of a parsed kernel.
pub struct Workload {
    builtin: BuiltinKernel,
    kernel: Kernel,
    lowers: Vec<i64>,
    strides: Vec<usize>,
    plane: usize,
    iterations: usize,
    data: Data,
}

impl fmt::Debug for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Workload")
            .field("builtin", &self.builtin)
            .field("kernel", &self.kernel.name)
            .field("elements", &self.elements())
            .field("iterations", &self.iterations)
            .finish()
    }
}

impl Workload {
    pub fn new(builtin: BuiltinKernel, kernel: &Kernel) -> Result<Self, ExecError> {
        if builtin == BuiltinKernel::GkvLike && kernel.depth() != 4 {
            return Err(ExecError::Incompatible(format!(
                "built-in kernel gkv-like needs a 4-deep nest, '{}' has depth {}",
                kernel.name,
                kernel.depth()
            )));
        }
        let extents = kernel.extents().ok_or(ExecError::Unevaluable)?;
        let mut lens = Vec::with_capacity(extents.len());
        for (h, &(_, len)) in kernel.nest.iter().zip(&extents) {
            if len < 1 {
                return Err(ExecError::EmptyLoop(h.index.clone()));
            }
            lens.push(usize::try_from(len).map_err(|_| ExecError::Overflow)?);
        }
        let total = lens
            .iter()
            .try_fold(1usize, |acc, &l| acc.checked_mul(l))
            .ok_or(ExecError::Overflow)?;
        let mut strides = vec![1usize; lens.len()];
        for j in (0..lens.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * lens[j + 1];
        }
        let plane = total / lens[0];
        let data = match builtin {
            BuiltinKernel::GkvLike => Data::Gkv {
                inputs: GkvInputs {
                    df1: complex_array(total, 1)?,
                    df2: complex_array(total, 2)?,
                    ey: complex_array(plane, 3)?,
                    by: complex_array(plane, 4)?,
                    ex: complex_array(plane, 5)?,
                    bx: complex_array(plane, 6)?,
                    vl: real_array(lens[0], 7)?,
                    cs1: 0.75,
                    cef: 0.5,
                },
                out: alloc(total, Complex64::new(0.0, 0.0))?,
            },
            BuiltinKernel::StreamLike => Data::Stream {
                inputs: StreamInputs {
                    a: real_array(total, 11)?,
                    b: real_array(total, 12)?,
                    s: 1.5,
                },
                out: alloc(total, 0.0)?,
            },
        };
        Ok(Workload {
            builtin,
            kernel: kernel.clone(),
            lowers: extents.iter().map(|&(lo, _)| lo).collect(),
            strides,
            plane,
            iterations: 1,
            data,
        })
    }

    /// Executions of the tuned loop per timed repetition.
    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations.max(1);
        self
    }

    pub fn builtin(&self) -> BuiltinKernel {
        self.builtin
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn elements(&self) -> usize {
        match &self.data {
            Data::Gkv { out, .. } => out.len(),
            Data::Stream { out, .. } => out.len(),
        }
    }

    /// FNV-1a digest of the output array bits.
    pub fn checksum(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01B3;
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        let mut mix = |bits: u64| {
            h ^= bits;
            h = h.wrapping_mul(PRIME);
        };
        match &self.data {
            Data::Gkv { out, .. } => out.iter().for_each(|c| {
                mix(c.re.to_bits());
                mix(c.im.to_bits());
            }),
            Data::Stream { out, .. } => out.iter().for_each(|x| mix(x.to_bits())),
        }
        h
    }

    /// Runs the variant once with `threads` workers and returns wall time.
    pub fn run_once(&mut self, variant: &Variant, threads: usize) -> Result<Duration, ExecError> {
        if threads == 0 {
            return Err(ExecError::InvalidThreads(0));
        }
        let plan = LoopPlan::new(&self.kernel, variant)?;
        let schedule = Schedule::block(plan.parallel.len(), threads);
        let lowers = &self.lowers;
        let strides = &self.strides;
        let plane = self.plane;
        let iterations = self.iterations;
        let linear = move |t: &[i64]| -> usize {
            t.iter()
                .zip(lowers)
                .zip(strides)
                .map(|((&v, &lo), &s)| (v - lo) as usize * s)
                .sum()
        };
        let elapsed = match &mut self.data {
            Data::Gkv { inputs, out } => {
                let inputs = &*inputs;
                execute(&plan, &schedule, out, iterations, &|t: &[i64]| {
                    let lin = linear(t);
                    inputs.compute(lin, lin % plane, lin / plane)
                })
            }
            Data::Stream { inputs, out } => {
                let inputs = &*inputs;
                execute(&plan, &schedule, out, iterations, &|t: &[i64]| {
                    let lin = linear(t);
                    inputs.a[lin] + inputs.s * inputs.b[lin]
                })
            }
        };
        Ok(elapsed)
    }

    /// `reps` timed runs, each wrapped in a thread set/restore through
    /// `control`. The worker count is whatever the shim reports as effective.
    pub fn measure(
        &mut self,
        control: &ThreadControl,
        variant: &Variant,
        threads: usize,
        reps: usize,
    ) -> Result<Vec<f64>, ExecError> {
        let mut costs = Vec::with_capacity(reps);
        for _ in 0..reps {
            let d = with_threads(control, threads, |effective| {
                self.run_once(variant, effective)
            })?;
            costs.push(d.as_secs_f64().max(f64::MIN_POSITIVE));
        }
        Ok(costs)
    }
}

type Assignment<'a, T> = (u64, std::ops::Range<u64>, &'a mut [T]);

fn execute<T, F>(
    plan: &LoopPlan,
    schedule: &Schedule,
    out: &mut [T],
    iterations: usize,
    compute: &F,
) -> Duration
where
    T: Send,
    F: Fn(&[i64]) -> T + Sync,
{
    let inner = plan.inner_count() as usize;
    let block = plan.parallel.len() as usize * inner;
    let mut per_thread: Vec<Vec<Assignment<'_, T>>> =
        (0..schedule.threads).map(|_| Vec::new()).collect();
    let mut rest = out;
    for o in 0..plan.outer_count() {
        let (mut region, tail) = rest.split_at_mut(block);
        rest = tail;
        for (range, &owner) in schedule.chunks.iter().zip(&schedule.owners) {
            let len = (range.end - range.start) as usize * inner;
            let (piece, after) = region.split_at_mut(len);
            region = after;
            if len > 0 {
                per_thread[owner].push((o, range.clone(), piece));
            }
        }
    }

    let worker = |mut work: Vec<Assignment<'_, T>>| {
        let mut tuple = vec![0i64; plan.arity];
        for _ in 0..iterations {
            for (o, range, slice) in work.iter_mut() {
                plan.assign_outer(*o, &mut tuple);
                let mut w = 0;
                plan.run_range(range.clone(), &mut tuple, &mut |t: &[i64]| {
                    slice[w] = compute(t);
                    w += 1;
                });
            }
        }
    };

    let mut lists = per_thread.into_iter();
    let first = lists.next().unwrap_or_default();
    let start = Instant::now();
    thread::scope(|s| {
        for list in lists {
            s.spawn(|| worker(list));
        }
        worker(first);
    });
    start.elapsed()
}

/// Allocates the built-in named `kernel_id` at the kernel's sizes and times
/// `reps` runs of `variant`.
pub fn run_measured(
    kernel: &Kernel,
    kernel_id: &str,
    variant: &Variant,
    threads: usize,
    reps: usize,
) -> Result<Vec<f64>, ExecError> {
    let builtin: BuiltinKernel = kernel_id.parse()?;
    if reps == 0 {
        return Ok(Vec::new());
    }
    let mut w = Workload::new(builtin, kernel)?;
    let control = ThreadControl::new(threads);
    w.measure(&control, variant, threads, reps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_kernel;
    use crate::transform::enumerate_variants;

    fn small_gkv() -> Kernel {
        parse_kernel(BuiltinKernel::GkvLike.source())
            .unwrap()
            .with_lengths(&[3, 4, 5, 6])
            .unwrap()
    }

    #[test]
    fn positive_costs() {
        let k = small_gkv();
        let e = enumerate_variants(&k).unwrap();
        let costs = run_measured(&k, "gkv-like", e.baseline(), 1, 3).unwrap();
        assert_eq!(costs.len(), 3);
        assert!(costs.iter().all(|&c| c > 0.0));
        assert!(run_measured(&k, "gkv-like", e.baseline(), 1, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unknown_kernel() {
        let k = small_gkv();
        let e = enumerate_variants(&k).unwrap();
        assert!(matches!(
            run_measured(&k, "nope", e.baseline(), 1, 1),
            Err(ExecError::UnknownKernel(_))
        ));
    }

    #[test]
    fn output_independent_of_variant_and_threads() {
        for builtin in BuiltinKernel::ALL {
            let k = parse_kernel(builtin.source()).unwrap();
            let k = k.with_lengths(&vec![3; k.depth()][..]).unwrap();
            let e = enumerate_variants(&k).unwrap();
            let mut w = Workload::new(builtin, &k).unwrap();
            w.run_once(e.baseline(), 1).unwrap();
            let reference = w.checksum();
            for v in &e.variants {
                for t in [1, 2, 3, 7] {
                    let mut w = Workload::new(builtin, &k).unwrap();
                    w.run_once(v, t).unwrap();
                    assert_eq!(w.checksum(), reference, "{builtin} {:?} t={t}", v.coords());
                }
            }
        }
    }

    #[test]
    fn gkv_needs_four_loops() {
        let k = parse_kernel(BuiltinKernel::StreamLike.source()).unwrap();
        if k.depth() != 4 {
            assert!(matches!(
                Workload::new(BuiltinKernel::GkvLike, &k),
                Err(ExecError::Incompatible(_))
            ));
        }
    }

    #[test]
    fn measure_restores_threads() {
        let k = small_gkv();
        let e = enumerate_variants(&k).unwrap();
        let mut w = Workload::new(BuiltinKernel::GkvLike, &k).unwrap();
        let ctl = ThreadControl::new(4);
        w.measure(&ctl, e.baseline(), 2, 2).unwrap();
        assert_eq!(ctl.current(), 4);
        assert_eq!(ctl.history(), vec![2, 4, 2, 4]);
    }
}
