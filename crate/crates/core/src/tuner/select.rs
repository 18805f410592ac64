use std::cmp::Ordering;

use super::params::PerformanceParams;
use super::sweep::Measurement;
use super::TunerError;

/// Median of `costs`; mean of the two middle values for even lengths.
pub fn median(costs: &[f64]) -> Option<f64> {
    if costs.is_empty() {
        return None;
    }
    let mut v = costs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

fn rank(a: &Measurement, b: &Measurement) -> Ordering {
    let (x, y) = (
        a.aggregate.unwrap_or(f64::INFINITY),
        b.aggregate.unwrap_or(f64::INFINITY),
    );
    x.total_cmp(&y)
        .then(a.pp.threads.cmp(&b.pp.threads))
        .then(a.pp.variant_id.cmp(&b.pp.variant_id))
}

/// Cheapest successful pair. Ties go to fewer threads, then lower id.
pub fn select_best(measurements: &[Measurement]) -> Result<PerformanceParams, TunerError> {
    measurements
        .iter()
        .filter(|m| m.is_ok())
        .min_by(|a, b| rank(a, b))
        .map(|m| m.pp)
        .ok_or(TunerError::NoSuccessfulMeasurements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(id: u32, t: usize, c: f64) -> Measurement {
        Measurement::ok(
            PerformanceParams {
                variant_id: id,
                threads: t,
            },
            vec![c],
        )
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[1.0, 1.0, 100.0, 1.0, 1.0]), Some(1.0));
    }

    #[test]
    fn tie_breaks() {
        let pp = |id, t| PerformanceParams {
            variant_id: id,
            threads: t,
        };
        assert_eq!(
            select_best(&[m(2, 4, 1.0), m(1, 8, 1.0)]).unwrap(),
            pp(2, 4)
        );
        assert_eq!(
            select_best(&[m(3, 4, 1.0), m(2, 4, 1.0)]).unwrap(),
            pp(2, 4)
        );
        assert_eq!(
            select_best(&[m(3, 4, 0.5), m(2, 1, 1.0)]).unwrap(),
            pp(3, 4)
        );
        let failed = Measurement::failed(pp(1, 1));
        assert_eq!(
            select_best(&[failed.clone(), m(5, 2, 9.0)]).unwrap(),
            pp(5, 2)
        );
        assert_eq!(
            select_best(&[failed]),
            Err(TunerError::NoSuccessfulMeasurements)
        );
    }

    fn table() -> impl Strategy<Value = Vec<Measurement>> {
        prop::collection::btree_map((1u32..12, 1usize..9), 1u32..6, 1..40).prop_map(|map| {
            map.into_iter()
                .map(|((id, t), c)| m(id, t, f64::from(c) * 0.25))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn argmin_law(ms in table()) {
            let best = select_best(&ms).unwrap();
            let cost = |pp: PerformanceParams| ms.iter().find(|m| m.pp == pp).unwrap().aggregate.unwrap();
            let c = cost(best);
            for x in &ms {
                let a = x.aggregate.unwrap();
                prop_assert!(c <= a);
                if a == c {
                    prop_assert!((best.threads, best.variant_id) <= (x.pp.threads, x.pp.variant_id));
                }
            }
        }

        #[test]
        fn order_independent(ms in table(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = ms.clone();
            shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            prop_assert_eq!(select_best(&ms).unwrap(), select_best(&shuffled).unwrap());
        }

        #[test]
        fn scale_invariant(ms in table(), k in 0i32..8) {
            let factor = 2f64.powi(k - 4);
            let scaled: Vec<_> = ms
                .iter()
                .map(|x| m(x.pp.variant_id, x.pp.threads, x.aggregate.unwrap() * factor))
                .collect();
            prop_assert_eq!(select_best(&ms).unwrap(), select_best(&scaled).unwrap());
        }
    }
}
