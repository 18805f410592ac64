use std::collections::HashMap;
use std::str::FromStr;

use crate::exec::{ExecError, ThreadControl, Workload};
use crate::transform::Enumeration;

use super::params::PerformanceParams;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("unknown variant id {0}")]
    UnknownVariant(u32),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("synthetic failure")]
    Synthetic,
    #[error("invalid provider spec '{0}'")]
    InvalidSpec(String),
}

/// Source of per-repetition costs in seconds.
pub trait CostProvider {
    fn measure(&mut self, pp: &PerformanceParams, reps: usize) -> Result<Vec<f64>, ProviderError>;
}

/// Times a built-in workload.
#[derive(Debug)]
pub struct MeasuredProvider<'a> {
    workload: Workload,
    enumeration: &'a Enumeration,
    control: ThreadControl,
}

impl<'a> MeasuredProvider<'a> {
    pub fn new(workload: Workload, enumeration: &'a Enumeration, max_threads: usize) -> Self {
        MeasuredProvider {
            workload,
            enumeration,
            control: ThreadControl::new(max_threads),
        }
    }

    pub fn control(&self) -> &ThreadControl {
        &self.control
    }

    pub fn workload_mut(&mut self) -> &mut Workload {
        &mut self.workload
    }
}

impl CostProvider for MeasuredProvider<'_> {
    fn measure(&mut self, pp: &PerformanceParams, reps: usize) -> Result<Vec<f64>, ProviderError> {
        let v = self
            .enumeration
            .by_id(pp.variant_id)
            .ok_or(ProviderError::UnknownVariant(pp.variant_id))?;
        Ok(self.workload.measure(&self.control, v, pp.threads, reps)?)
    }
}

/// Deterministic cost functions for tests and dry runs.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticModel {
    /// `1 / threads`, identical for every variant.
    InverseThreads,
    /// `1 + |g - G| + |d - D| + |ln t - ln T|`.
    Bowl {
        group_size: usize,
        depth: usize,
        threads: usize,
    },
    /// Every point fails.
    Fail,
    /// Fixed cost per point; missing points fail.
    Table(HashMap<PerformanceParams, f64>),
}

impl FromStr for SyntheticModel {
    type Err = ProviderError;

    /// `inv-threads`, `fail` or `bowl:G,D,T`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProviderError::InvalidSpec(s.to_string());
        match s {
            "inv-threads" => Ok(SyntheticModel::InverseThreads),
            "fail" => Ok(SyntheticModel::Fail),
            _ => {
                let rest = s.strip_prefix("bowl:").ok_or_else(bad)?;
                let nums: Vec<usize> = rest
                    .split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?;
                match nums[..] {
                    [g, d, t] if g > 0 && d > 0 && t > 0 => Ok(SyntheticModel::Bowl {
                        group_size: g,
                        depth: d,
                        threads: t,
                    }),
                    _ => Err(bad()),
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    model: SyntheticModel,
    coords: HashMap<u32, (usize, usize)>,
}

impl SyntheticProvider {
    pub fn new(model: SyntheticModel, enumeration: &Enumeration) -> Self {
        SyntheticProvider {
            model,
            coords: enumeration
                .variants
                .iter()
                .map(|v| (v.id, v.coords()))
                .collect(),
        }
    }

    fn cost(&self, pp: &PerformanceParams) -> Result<f64, ProviderError> {
        let (g, d) = *self
            .coords
            .get(&pp.variant_id)
            .ok_or(ProviderError::UnknownVariant(pp.variant_id))?;
        match &self.model {
            SyntheticModel::InverseThreads => Ok(1.0 / pp.threads as f64),
            SyntheticModel::Bowl {
                group_size,
                depth,
                threads,
            } => Ok(1.0
                + g.abs_diff(*group_size) as f64
                + d.abs_diff(*depth) as f64
                + ((pp.threads as f64).ln() - (*threads as f64).ln()).abs()),
            SyntheticModel::Fail => Err(ProviderError::Synthetic),
            SyntheticModel::Table(t) => t.get(pp).copied().ok_or(ProviderError::Synthetic),
        }
    }
}

impl CostProvider for SyntheticProvider {
    fn measure(&mut self, pp: &PerformanceParams, reps: usize) -> Result<Vec<f64>, ProviderError> {
        let c = self.cost(pp)?;
        Ok(vec![c; reps])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_specs() {
        assert_eq!(
            "inv-threads".parse::<SyntheticModel>().unwrap(),
            SyntheticModel::InverseThreads
        );
        assert_eq!(
            "fail".parse::<SyntheticModel>().unwrap(),
            SyntheticModel::Fail
        );
        assert_eq!(
            "bowl:2,1,8".parse::<SyntheticModel>().unwrap(),
            SyntheticModel::Bowl {
                group_size: 2,
                depth: 1,
                threads: 8
            }
        );
        for bad in ["bowl:2,1", "bowl:0,1,1", "bowl:a,b,c", "cosine"] {
            assert!(bad.parse::<SyntheticModel>().is_err(), "{bad}");
        }
    }
}
