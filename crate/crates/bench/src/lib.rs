//! Fixtures shared by the benchmarks.

use oatforge_core::exec::BuiltinKernel;
use oatforge_core::tuner::{Measurement, PerformanceParams};
use oatforge_core::{enumerate_variants, parse_kernel, Enumeration, Kernel};

/// The built-in kernel at the given loop lengths, with its variants.
pub fn fixture(builtin: BuiltinKernel, lengths: &[i64]) -> (Kernel, Enumeration) {
    let k = parse_kernel(builtin.source())
        .expect("built-in kernel parses")
        .with_lengths(lengths)
        .expect("lengths match the nest depth");
    let e = enumerate_variants(&k).expect("built-in kernel enumerates");
    (k, e)
}

/// A deterministic table of `variants * threads.len()` measurements.
pub fn table(variants: u32, threads: &[usize]) -> Vec<Measurement> {
    let mut out = Vec::new();
    for id in 1..=variants {
        for &t in threads {
            let c = 1.0 + f64::from((id * 7 + t as u32 * 13) % 17) / 16.0;
            out.push(Measurement::ok(
                PerformanceParams {
                    variant_id: id,
                    threads: t,
                },
                vec![c, c * 1.01, c * 0.99],
            ));
        }
    }
    out
}
