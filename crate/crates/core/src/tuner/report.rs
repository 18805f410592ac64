use std::collections::BTreeMap;

use serde::Serialize;

use crate::transform::Enumeration;

use super::store::TuningResult;
use super::sweep::Status;

/// One table row with speedups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupRow {
    pub variant_id: u32,
    pub label: String,
    pub threads: usize,
    pub status: Status,
    pub aggregate: Option<f64>,
    /// Baseline at the maximum thread count over this point.
    pub vs_baseline: Option<f64>,
    /// Same variant at the maximum thread count over this point.
    pub vs_own_max: Option<f64>,
}

pub fn speedup_rows(result: &TuningResult, enumeration: &Enumeration) -> Vec<SpeedupRow> {
    let tmax = result.bp.max_threads;
    let base = enumeration.baseline().id;
    let cost = |id: u32, t: usize| {
        result
            .table
            .iter()
            .find(|m| m.pp.variant_id == id && m.pp.threads == t && m.is_ok())
            .and_then(|m| m.aggregate)
    };
    let base_cost = cost(base, tmax);
    let mut rows: Vec<SpeedupRow> = result
        .table
        .iter()
        .map(|m| {
            let label = enumeration
                .by_id(m.pp.variant_id)
                .map_or_else(|| "?".to_string(), |v| v.label.clone());
            let ratio = |num: Option<f64>| Some(num? / m.aggregate?);
            SpeedupRow {
                variant_id: m.pp.variant_id,
                label,
                threads: m.pp.threads,
                status: m.status,
                aggregate: m.aggregate,
                vs_baseline: ratio(base_cost),
                vs_own_max: ratio(cost(m.pp.variant_id, tmax)),
            }
        })
        .collect();
    rows.sort_by_key(|r| (r.variant_id, r.threads));
    rows
}

/// Best thread count per variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant_id: u32,
    pub label: String,
    pub best_threads: usize,
    pub aggregate: f64,
}

pub fn variant_summary(result: &TuningResult, enumeration: &Enumeration) -> Vec<VariantSummary> {
    let mut best: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for m in result.table.iter().filter(|m| m.is_ok()) {
        let c = m.aggregate.unwrap_or(f64::INFINITY);
        let e = best.entry(m.pp.variant_id).or_insert((c, m.pp.threads));
        if c.total_cmp(&e.0).then(m.pp.threads.cmp(&e.1)).is_lt() {
            *e = (c, m.pp.threads);
        }
    }
    best.into_iter()
        .map(|(id, (aggregate, best_threads))| VariantSummary {
            variant_id: id,
            label: enumeration
                .by_id(id)
                .map_or_else(|| "?".to_string(), |v| v.label.clone()),
            best_threads,
            aggregate,
        })
        .collect()
}
