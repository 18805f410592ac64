use std::collections::BTreeMap;

use crate::frontend::{BoundExpr, LoopHeader};

use super::TransformError;

/// Recovers one original index from the fused counter:
/// `mod((f - 1) / stride, modulus) + offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryExpr {
    pub target: String,
    pub stride: u64,
    pub modulus: u64,
    pub offset: i64,
}

impl RecoveryExpr {
    #[inline]
    pub fn value(&self, f: u64) -> i64 {
        (((f - 1) / self.stride) % self.modulus) as i64 + self.offset
    }
}

/// The innermost `size` loops of a nest fused into a single counter running
/// over `1..=fused_length`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollapseGroup {
    pub start_depth: usize,
    pub size: usize,
    pub fused_name: String,
    pub fused_length: u64,
    pub member_names: Vec<String>,
    pub member_lengths: Vec<u64>,
    pub member_lowers: Vec<i64>,
    /// Source bounds of each member, kept for code emission.
    pub member_bounds: Vec<(BoundExpr, BoundExpr)>,
}

impl CollapseGroup {
    pub fn is_identity(&self) -> bool {
        self.size == 1
    }

    /// Suffix products of member lengths; the innermost stride is 1.
    pub fn strides(&self) -> Vec<u64> {
        let mut strides = vec![1u64; self.size];
        for j in (0..self.size.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * self.member_lengths[j + 1];
        }
        strides
    }

    /// One recovery expression per member, outer to inner.
    pub fn recovery_exprs(&self) -> Vec<RecoveryExpr> {
        self.strides()
            .into_iter()
            .enumerate()
            .map(|(j, stride)| RecoveryExpr {
                target: self.member_names[j].clone(),
                stride,
                modulus: self.member_lengths[j],
                offset: self.member_lowers[j],
            })
            .collect()
    }
}

/// Collapses the innermost `g` loops of `nest`.
pub fn build_collapse(
    nest: &[LoopHeader],
    params: &BTreeMap<String, i64>,
    g: usize,
) -> Result<CollapseGroup, TransformError> {
    let n = nest.len();
    if g == 0 || g > n {
        return Err(TransformError::InvalidGroupSize { size: g, depth: n });
    }
    let members = &nest[n - g..];
    let mut lengths = Vec::with_capacity(g);
    let mut lowers = Vec::with_capacity(g);
    for h in members {
        let lo = h
            .lower
            .eval(params)
            .ok_or_else(|| TransformError::Unevaluable(h.index.clone()))?;
        let len = h
            .length(params)
            .ok_or_else(|| TransformError::Unevaluable(h.index.clone()))?;
        if len <= 0 {
            return Err(TransformError::EmptyLoop {
                index: h.index.clone(),
                length: len,
            });
        }
        lengths.push(len as u64);
        lowers.push(lo);
    }
    let fused_length = lengths
        .iter()
        .try_fold(1u64, |acc, &l| acc.checked_mul(l))
        .filter(|&l| l <= i64::MAX as u64)
        .ok_or(TransformError::Overflow)?;
    let names: Vec<String> = members.iter().map(|h| h.index.clone()).collect();
    Ok(CollapseGroup {
        start_depth: n - g + 1,
        size: g,
        fused_name: names.join("_"),
        fused_length,
        member_names: names,
        member_lengths: lengths,
        member_lowers: lowers,
        member_bounds: members
            .iter()
            .map(|h| (h.lower.clone(), h.upper.clone()))
            .collect(),
    })
}

/// Maps a fused counter value back to the original indices, outer to inner.
pub fn recover_indices(
    collapse: &CollapseGroup,
    f: u64,
) -> Result<Vec<(String, i64)>, TransformError> {
    if f == 0 || f > collapse.fused_length {
        return Err(TransformError::FusedIndexOutOfRange {
            value: f,
            length: collapse.fused_length,
        });
    }
    Ok(collapse
        .recovery_exprs()
        .into_iter()
        .map(|r| {
            let v = r.value(f);
            (r.target, v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::BoundExpr;

    fn header(index: &str, lo: i64, hi: i64, depth: usize) -> LoopHeader {
        LoopHeader {
            index: index.into(),
            lower: BoundExpr::literal(lo),
            upper: BoundExpr::literal(hi),
            depth,
        }
    }

    fn full_sized() -> Vec<LoopHeader> {
        vec![
            header("iz", -8, 7, 1),
            header("mx", 0, 127, 2),
            header("my", 0, 64, 3),
        ]
    }

    #[test]
    fn zxy_group_strides() {
        let g = build_collapse(&full_sized(), &BTreeMap::new(), 3).unwrap();
        assert_eq!(g.strides(), vec![8320, 65, 1]);
        assert_eq!(g.fused_length, 133_120);
        assert_eq!(g.fused_name, "iz_mx_my");
        assert_eq!(g.start_depth, 1);
    }

    #[test]
    fn recovery_endpoints() {
        let g = build_collapse(&full_sized(), &BTreeMap::new(), 3).unwrap();
        let first = recover_indices(&g, 1).unwrap();
        assert_eq!(
            first,
            vec![("iz".into(), -8), ("mx".into(), 0), ("my".into(), 0)]
        );
        let last = recover_indices(&g, 133_120).unwrap();
        assert_eq!(
            last,
            vec![("iz".into(), 7), ("mx".into(), 127), ("my".into(), 64)]
        );
    }

    #[test]
    fn recovery_matches_walk() {
        let g = build_collapse(&full_sized(), &BTreeMap::new(), 3).unwrap();
        // walk the triple nest 66 steps
        let mut step = 0;
        let mut found = None;
        'outer: for iz in -8..=7 {
            for mx in 0..=127 {
                for my in 0..=64 {
                    step += 1;
                    if step == 66 {
                        found = Some((iz, mx, my));
                        break 'outer;
                    }
                }
            }
        }
        assert_eq!(found, Some((-8, 1, 0)));
        let r = recover_indices(&g, 66).unwrap();
        assert_eq!(
            r,
            vec![("iz".into(), -8), ("mx".into(), 1), ("my".into(), 0)]
        );
    }

    #[test]
    fn identity_group() {
        let nest = vec![header("i", 1, 10, 1)];
        let g = build_collapse(&nest, &BTreeMap::new(), 1).unwrap();
        assert!(g.is_identity());
        assert_eq!(g.fused_length, 10);
        assert_eq!(g.fused_name, "i");
        assert_eq!(recover_indices(&g, 4).unwrap(), vec![("i".into(), 4)]);
    }

    #[test]
    fn pair_group_is_bijective() {
        let nest = vec![header("a", 0, 1, 1), header("b", 0, 2, 2)];
        let g = build_collapse(&nest, &BTreeMap::new(), 2).unwrap();
        assert_eq!(g.strides(), vec![3, 1]);
        assert_eq!(g.fused_length, 6);
        let mut expected = Vec::new();
        for a in 0..=1 {
            for b in 0..=2 {
                expected.push(vec![a, b]);
            }
        }
        let got: Vec<Vec<i64>> = (1..=6)
            .map(|f| {
                recover_indices(&g, f)
                    .unwrap()
                    .into_iter()
                    .map(|(_, v)| v)
                    .collect()
            })
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn empty_loop_rejected() {
        let nest = vec![header("a", 0, 3, 1), header("b", 5, 4, 2)];
        let e = build_collapse(&nest, &BTreeMap::new(), 2).unwrap_err();
        assert!(e.to_string().contains("empty loop cannot be collapsed"));
    }

    #[test]
    fn out_of_range() {
        let g = build_collapse(&full_sized(), &BTreeMap::new(), 2).unwrap();
        assert!(recover_indices(&g, 0).is_err());
        assert!(recover_indices(&g, g.fused_length + 1).is_err());
    }

    #[test]
    fn overflow_detected() {
        let nest = vec![
            header("a", 0, i64::MAX / 4, 1),
            header("b", 0, i64::MAX / 4, 2),
        ];
        assert!(matches!(
            build_collapse(&nest, &BTreeMap::new(), 2),
            Err(TransformError::Overflow)
        ));
    }
}
