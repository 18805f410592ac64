mod common;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use oatforge_core::exec::{run_trace, run_trace_with, BuiltinKernel, ScheduleKind, Workload};
use oatforge_core::{enumerate_variants, parse_kernel};

#[test]
fn full_size_kernel_trace() {
    let k = parse_kernel(include_str!("../kernels/exb_realspcal.oat"))
        .unwrap()
        .with_lengths(&[16, 16, 128, 65])
        .unwrap();
    let e = enumerate_variants(&k).unwrap();
    let base = run_trace(&k, e.baseline(), 1).unwrap();
    assert_eq!(base.tuple_count(), 2_129_920);
    let fused = run_trace(&k, e.by_coords(4, 1).unwrap(), 1).unwrap();
    assert_eq!(fused.per_thread, base.per_thread);
    let first: Vec<i64> = base.thread_tuples(0).next().unwrap().to_vec();
    let last: Vec<i64> = base.thread_tuples(0).last().unwrap().to_vec();
    assert_eq!(first, vec![1, -4, 0, 0]);
    assert_eq!(last, vec![16, 11, 127, 64]);
}

#[test]
fn chunked_schedule_is_equivalent() {
    let mut rng = StdRng::seed_from_u64(7);
    for depth in 1..=4 {
        let nest = common::random_nest(&mut rng, depth, 6);
        let k = parse_kernel(&nest.source).unwrap();
        let oracle = common::oracle_tuples(&nest.lowers, &nest.lengths);
        for v in &enumerate_variants(&k).unwrap().variants {
            for chunk in [1, 2, 5] {
                let t = run_trace_with(&k, v, 3, ScheduleKind::StaticChunk(chunk)).unwrap();
                let got: Vec<Vec<i64>> = t
                    .flattened_multiset()
                    .into_iter()
                    .map(<[i64]>::to_vec)
                    .collect();
                assert_eq!(got, oracle);
            }
        }
    }
}

#[test]
fn stream_checksum_independent_of_variant() {
    let k = parse_kernel(BuiltinKernel::StreamLike.source())
        .unwrap()
        .with_lengths(&[3, 5, 7])
        .unwrap();
    let e = enumerate_variants(&k).unwrap();
    let mut w = Workload::new(BuiltinKernel::StreamLike, &k).unwrap();
    w.run_once(e.baseline(), 1).unwrap();
    let want = w.checksum();
    for v in &e.variants {
        w.run_once(v, 4).unwrap();
        assert_eq!(w.checksum(), want, "variant {}", v.id);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_print_round_trip(seed in any::<u64>(), depth in 1usize..=4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let nest = common::random_nest(&mut rng, depth, 7);
        let k = parse_kernel(&nest.source).unwrap();
        let printed = k.to_string();
        let again = parse_kernel(&printed).unwrap();
        prop_assert!(k.same_structure(&again), "printed:\n{printed}");
        prop_assert_eq!(again.to_string(), printed);
    }

    #[test]
    fn traces_cover_the_box(seed in any::<u64>(), depth in 1usize..=4, t in 1usize..=9) {
        let mut rng = StdRng::seed_from_u64(seed);
        let nest = common::random_nest(&mut rng, depth, 6);
        let k = parse_kernel(&nest.source).unwrap();
        let oracle = common::oracle_tuples(&nest.lowers, &nest.lengths);
        for v in &enumerate_variants(&k).unwrap().variants {
            let trace = run_trace(&k, v, t).unwrap();
            let got: Vec<Vec<i64>> = trace.flattened_multiset().into_iter().map(<[i64]>::to_vec).collect();
            prop_assert_eq!(&got, &oracle);
            // each thread walks its share in lexicographic order
            for p in 0..trace.threads() {
                let mine: Vec<&[i64]> = trace.thread_tuples(p).collect();
                prop_assert!(mine.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
