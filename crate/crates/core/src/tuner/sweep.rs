use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::transform::Variant;

use super::params::{BasicParams, PerformanceParams};
use super::provider::CostProvider;
use super::select::median;
use super::TunerError;

pub const DEFAULT_REPS: usize = 5;

const LADDER: [usize; 6] = [1, 2, 4, 8, 16, 32];

/// `{1, 2, 4, 8, 16, 32}` restricted to `1..=max_threads`.
pub fn default_ladder(max_threads: usize) -> Vec<usize> {
    LADDER
        .iter()
        .copied()
        .filter(|&t| t <= max_threads)
        .collect()
}

pub fn full_ladder(max_threads: usize) -> Vec<usize> {
    (1..=max_threads).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPlan {
    /// Ordered by variant id, then thread count.
    pub points: Vec<PerformanceParams>,
    pub warnings: Vec<String>,
}

/// Cross product of variants and thread candidates. Thread counts outside
/// `1..=max_threads` are dropped with a warning.
pub fn plan_sweep(
    bp: &BasicParams,
    variants: &[Variant],
    thread_candidates: &[usize],
) -> Result<SweepPlan, TunerError> {
    if variants.is_empty() {
        return Err(TunerError::NoVariants);
    }
    let mut warnings = Vec::new();
    let mut threads = BTreeSet::new();
    for &t in thread_candidates {
        if (1..=bp.max_threads).contains(&t) {
            threads.insert(t);
        } else {
            warnings.push(format!(
                "thread count {t} dropped (maximum is {})",
                bp.max_threads
            ));
        }
    }
    if threads.is_empty() {
        return Err(TunerError::EmptyLadder {
            max_threads: bp.max_threads,
        });
    }
    let ids: BTreeSet<u32> = variants.iter().map(|v| v.id).collect();
    let points = ids
        .iter()
        .flat_map(|&variant_id| {
            threads.iter().map(move |&threads| PerformanceParams {
                variant_id,
                threads,
            })
        })
        .collect();
    Ok(SweepPlan { points, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    #[serde(flatten)]
    pub pp: PerformanceParams,
    /// Seconds per repetition; empty when failed.
    pub costs: Vec<f64>,
    /// Median of `costs`; absent when failed.
    pub aggregate: Option<f64>,
    pub status: Status,
}

impl Measurement {
    pub fn ok(pp: PerformanceParams, costs: Vec<f64>) -> Self {
        let aggregate = median(&costs);
        Measurement {
            pp,
            costs,
            aggregate,
            status: Status::Ok,
        }
    }

    pub fn failed(pp: PerformanceParams) -> Self {
        Measurement {
            pp,
            costs: Vec::new(),
            aggregate: None,
            status: Status::Failed,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok && self.aggregate.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub measurements: Vec<Measurement>,
    pub warnings: Vec<String>,
}

/// Measures every plan point in order, one at a time.
pub fn run_sweep(
    plan: &SweepPlan,
    provider: &mut dyn CostProvider,
    reps: usize,
) -> Result<SweepOutcome, TunerError> {
    if reps == 0 {
        return Err(TunerError::InvalidReps);
    }
    let mut measurements = Vec::with_capacity(plan.points.len());
    let mut warnings = Vec::new();
    for &pp in &plan.points {
        match provider.measure(&pp, reps) {
            Ok(costs) if costs.is_empty() => {
                warnings.push(format!(
                    "variant {} at {} threads: provider returned no costs",
                    pp.variant_id, pp.threads
                ));
                measurements.push(Measurement::failed(pp));
            }
            Ok(costs) if costs.iter().any(|c| !c.is_finite() || *c <= 0.0) => {
                warnings.push(format!(
                    "variant {} at {} threads: non-positive cost",
                    pp.variant_id, pp.threads
                ));
                measurements.push(Measurement::failed(pp));
            }
            Ok(costs) => measurements.push(Measurement::ok(pp, costs)),
            Err(e) => {
                warnings.push(format!(
                    "variant {} at {} threads failed: {e}",
                    pp.variant_id, pp.threads
                ));
                measurements.push(Measurement::failed(pp));
            }
        }
    }
    if !measurements.iter().any(Measurement::is_ok) {
        return Err(TunerError::NoSuccessfulMeasurements);
    }
    Ok(SweepOutcome {
        measurements,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_kernel;
    use crate::transform::enumerate_variants;
    use crate::tuner::provider::{SyntheticModel, SyntheticProvider};
    use crate::tuner::select::select_best;

    fn setup() -> (BasicParams, crate::transform::Enumeration) {
        let k = parse_kernel(include_str!("../../kernels/exb_realspcal.oat")).unwrap();
        let e = enumerate_variants(&k).unwrap();
        (BasicParams::new(&k, 32, "test").unwrap(), e)
    }

    #[test]
    fn ladder() {
        assert_eq!(default_ladder(32), vec![1, 2, 4, 8, 16, 32]);
        assert_eq!(default_ladder(6), vec![1, 2, 4]);
        assert_eq!(full_ladder(3), vec![1, 2, 3]);
    }

    #[test]
    fn sixty_points() {
        let (bp, e) = setup();
        let plan = plan_sweep(&bp, &e.variants, &default_ladder(32)).unwrap();
        assert_eq!(plan.points.len(), 60);
        assert!(plan.points.windows(2).all(|w| w[0] < w[1]));
        assert!(plan.warnings.is_empty());
    }

    #[test]
    fn single_point() {
        let (bp, e) = setup();
        let plan = plan_sweep(&bp, &e.variants[..1], &[1]).unwrap();
        assert_eq!(plan.points.len(), 1);
    }

    #[test]
    fn out_of_range_threads_dropped() {
        let (bp, e) = setup();
        let plan = plan_sweep(&bp, &e.variants, &[1, 2, 4, 40, 2]).unwrap();
        assert_eq!(plan.points.len(), 30);
        assert_eq!(plan.warnings.len(), 1);
        assert!(plan.warnings[0].contains("40"));
        assert!(matches!(
            plan_sweep(&bp, &[], &[1]),
            Err(TunerError::NoVariants)
        ));
        assert!(matches!(
            plan_sweep(&bp, &e.variants, &[0, 64]),
            Err(TunerError::EmptyLadder { .. })
        ));
    }

    #[test]
    fn inverse_thread_cost_picks_max_threads() {
        let (bp, e) = setup();
        let plan = plan_sweep(&bp, &e.variants, &default_ladder(32)).unwrap();
        let mut p = SyntheticProvider::new(SyntheticModel::InverseThreads, &e);
        let out = run_sweep(&plan, &mut p, 3).unwrap();
        for v in &e.variants {
            let best = out
                .measurements
                .iter()
                .filter(|m| m.pp.variant_id == v.id)
                .min_by(|a, b| a.aggregate.unwrap().total_cmp(&b.aggregate.unwrap()))
                .unwrap();
            assert_eq!(best.pp.threads, 32);
        }
    }

    #[test]
    fn all_failed_is_error() {
        let (bp, e) = setup();
        let plan = plan_sweep(&bp, &e.variants, &[1, 2]).unwrap();
        let mut p = SyntheticProvider::new(SyntheticModel::Fail, &e);
        assert_eq!(
            run_sweep(&plan, &mut p, 1),
            Err(TunerError::NoSuccessfulMeasurements)
        );
        assert_eq!(run_sweep(&plan, &mut p, 0), Err(TunerError::InvalidReps));
    }

    #[test]
    fn bowl_minimum_found() {
        let (bp, e) = setup();
        let plan = plan_sweep(&bp, &e.variants, &default_ladder(32)).unwrap();
        let target = e.by_id(3).unwrap().coords();
        let mut p = SyntheticProvider::new(
            SyntheticModel::Bowl {
                group_size: target.0,
                depth: target.1,
                threads: 8,
            },
            &e,
        );
        let out = run_sweep(&plan, &mut p, 2).unwrap();
        // brute-force argmin over the table
        let brute = out
            .measurements
            .iter()
            .min_by(|a, b| a.aggregate.unwrap().total_cmp(&b.aggregate.unwrap()))
            .unwrap()
            .pp;
        let best = select_best(&out.measurements).unwrap();
        assert_eq!(best, brute);
        assert_eq!(
            best,
            PerformanceParams {
                variant_id: 3,
                threads: 8
            }
        );
    }

    #[test]
    fn failures_excluded() {
        let (bp, e) = setup();
        let plan = plan_sweep(&bp, &e.variants, &[1, 2, 4]).unwrap();
        let mut table = std::collections::HashMap::new();
        for pp in &plan.points {
            table.insert(*pp, 1.0 + pp.variant_id as f64);
        }
        // the cheapest point fails
        table.remove(&PerformanceParams {
            variant_id: 1,
            threads: 1,
        });
        table.remove(&PerformanceParams {
            variant_id: 1,
            threads: 2,
        });
        let mut p = SyntheticProvider::new(SyntheticModel::Table(table), &e);
        let out = run_sweep(&plan, &mut p, 1).unwrap();
        assert_eq!(out.warnings.len(), 2);
        assert_eq!(
            select_best(&out.measurements).unwrap(),
            PerformanceParams {
                variant_id: 1,
                threads: 4
            }
        );
    }
}
