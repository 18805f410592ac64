//! Tuning candidate enumeration.
//!
//! A candidate is a pair `(g, d)`: the innermost `g` loops are collapsed into
//! one fused loop, and the `parallel do` directive sits on loop `d` of the
//! resulting nest. Loops are never permuted; only the directive moves.

mod collapse;

use std::collections::BTreeSet;

use crate::frontend::{DirectiveKind, Kernel, LoopHeader};

pub use collapse::{build_collapse, recover_indices, CollapseGroup, RecoveryExpr};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("empty loop cannot be collapsed: '{index}' has length {length}")]
    EmptyLoop { index: String, length: i64 },
    #[error("kernel is untunable: loop '{index}' has length {length}")]
    Untunable { index: String, length: i64 },
    #[error("bounds of loop '{0}' cannot be evaluated from the kernel parameters")]
    Unevaluable(String),
    #[error("fused iteration count overflows the platform integer range")]
    Overflow,
    #[error("collapse group size {size} is outside 1..={depth}")]
    InvalidGroupSize { size: usize, depth: usize },
    #[error("fused index {value} outside 1..={length}")]
    FusedIndexOutOfRange { value: u64, length: u64 },
    #[error("fused loop name '{0}' clashes with an existing identifier")]
    NameClash(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    /// 1-based, assigned in `(g, d)` order.
    pub id: u32,
    pub collapse: CollapseGroup,
    /// Directive depth in the post-collapse nest, 1-based.
    pub directive_depth: usize,
    pub private_set: Vec<String>,
    /// Empty when nothing is collapsed.
    pub recovery: Vec<RecoveryExpr>,
    pub baseline: bool,
    pub label: String,
}

impl Variant {
    pub fn group_size(&self) -> usize {
        self.collapse.size
    }

    /// Depth of the nest after collapsing.
    pub fn post_depth(&self) -> usize {
        self.collapse.start_depth
    }

    pub fn coords(&self) -> (usize, usize) {
        (self.collapse.size, self.directive_depth)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub variants: Vec<Variant>,
    pub warnings: Vec<String>,
}

impl Enumeration {
    pub fn baseline(&self) -> &Variant {
        self.variants
            .iter()
            .find(|v| v.baseline)
            .expect("enumeration always contains the baseline")
    }

    pub fn by_id(&self, id: u32) -> Option<&Variant> {
        self.variants.iter().find(|v| v.id == id)
    }

    pub fn by_coords(&self, g: usize, d: usize) -> Option<&Variant> {
        self.variants.iter().find(|v| v.coords() == (g, d))
    }
}

/// Private variables for a directive on loop `d` of the collapsed nest:
/// every original index inside the parallel loop or recovered from a fused
/// loop at or inside it, then the fused counter itself when it lies strictly
/// inside. The parallel loop's own index is never listed.
pub fn compute_private_set(nest: &[LoopHeader], d: usize, collapse: &CollapseGroup) -> Vec<String> {
    let fused_pos = collapse.start_depth;
    let mut out = Vec::new();
    for h in nest {
        let keep = if h.depth < fused_pos || collapse.is_identity() {
            h.depth > d
        } else {
            fused_pos >= d
        };
        if keep {
            out.push(h.index.clone());
        }
    }
    if !collapse.is_identity() && fused_pos > d {
        out.push(collapse.fused_name.clone());
    }
    out
}

fn ordinal(n: usize) -> String {
    const WORDS: [&str; 10] = [
        "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth",
        "tenth",
    ];
    match WORDS.get(n.wrapping_sub(1)) {
        Some(w) => w.to_string(),
        None => format!("{n}th"),
    }
}

/// Human-readable description in the style "Directive to the outer-most loop
/// and xy collapse".
fn describe(collapse: &CollapseGroup, d: usize, original_depth: usize, baseline: bool) -> String {
    if baseline {
        return "Original loop".into();
    }
    let post_depth = collapse.start_depth;
    let tag = (!collapse.is_identity()).then(|| {
        let letters: String = collapse
            .member_names
            .iter()
            .filter_map(|n| n.chars().last())
            .collect();
        format!("{letters} collapse")
    });
    let position = if d == 1 {
        "Directive to the outer-most loop".to_string()
    } else if d == post_depth && collapse.is_identity() {
        "Directive to the innermost loop".to_string()
    } else {
        format!("Directive to the {} loop from the outside", ordinal(d))
    };
    match tag {
        Some(tag) if d == original_depth => tag,
        Some(tag) => format!("{position} and {tag}"),
        None => position,
    }
}

/// Enumerates every candidate the kernel's directives allow.
///
/// `LoopFusion` enables group sizes `1..=N`; `Exchange` enables directive
/// depths (its list, or all depths when empty) within the collapsed nest.
/// Without `Exchange` the directive stays at its source depth, moving onto
/// the fused loop when that loop is consumed by the collapse. The baseline
/// `(1, original depth)` is always included.
pub fn enumerate_variants(kernel: &Kernel) -> Result<Enumeration, TransformError> {
    let n = kernel.depth();
    let params = kernel.param_map();
    for h in &kernel.nest {
        let len = h
            .length(&params)
            .ok_or_else(|| TransformError::Unevaluable(h.index.clone()))?;
        if len <= 0 {
            return Err(TransformError::Untunable {
                index: h.index.clone(),
                length: len,
            });
        }
    }
    let fusion = kernel.directive(DirectiveKind::LoopFusion).is_some();
    let exchange = kernel.directive(DirectiveKind::Exchange);
    let original = kernel.original_depth();

    let mut warnings = Vec::new();
    let mut coords: BTreeSet<(usize, usize)> = BTreeSet::new();
    let sizes: Vec<usize> = if fusion { (1..=n).collect() } else { vec![1] };
    for &g in &sizes {
        let post = n - g + 1;
        match exchange {
            Some(ex) if ex.depths.is_empty() => coords.extend((1..=post).map(|d| (g, d))),
            Some(ex) => {
                for &d in &ex.depths {
                    if d <= post {
                        coords.insert((g, d));
                    } else {
                        warnings.push(format!(
                            "Exchange depth {d} skipped for collapse of {g} loops (collapsed nest depth {post})"
                        ));
                    }
                }
            }
            None => {
                coords.insert((g, original.min(post)));
            }
        }
    }
    coords.insert((1, original));

    let mut reserved: BTreeSet<&str> = kernel.params.iter().map(|(p, _)| p.as_str()).collect();
    reserved.extend(kernel.nest.iter().map(|h| h.index.as_str()));
    let arrays = kernel.body_arrays();
    reserved.extend(arrays.iter().map(String::as_str));

    let mut variants = Vec::with_capacity(coords.len());
    for (idx, (g, d)) in coords.into_iter().enumerate() {
        let collapse = build_collapse(&kernel.nest, &params, g)?;
        if !collapse.is_identity() && reserved.contains(collapse.fused_name.as_str()) {
            return Err(TransformError::NameClash(collapse.fused_name));
        }
        let baseline = g == 1 && d == original;
        let recovery = if collapse.is_identity() {
            Vec::new()
        } else {
            collapse.recovery_exprs()
        };
        variants.push(Variant {
            id: idx as u32 + 1,
            private_set: compute_private_set(&kernel.nest, d, &collapse),
            label: describe(&collapse, d, original, baseline),
            collapse,
            directive_depth: d,
            recovery,
            baseline,
        });
    }
    Ok(Enumeration { variants, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_kernel;

    fn gkv() -> Kernel {
        parse_kernel(include_str!("../../kernels/exb_realspcal.oat")).unwrap()
    }

    fn simple(depth: usize, directives: &str) -> Kernel {
        let names = ["i", "j", "k", "l", "m"];
        let mut src = String::from("kernel t\nparam n = 3\n");
        let (start, end): (Vec<&str>, Vec<&str>) = match directives {
            "both" => (
                vec![
                    "!oat$ install LoopFusion region start",
                    "!oat$ install Exchange region start",
                ],
                vec![
                    "!oat$ install Exchange region end",
                    "!oat$ install LoopFusion region end",
                ],
            ),
            "fusion" => (
                vec!["!oat$ install LoopFusion region start"],
                vec!["!oat$ install LoopFusion region end"],
            ),
            "exchange" => (
                vec!["!oat$ install Exchange region start"],
                vec!["!oat$ install Exchange region end"],
            ),
            _ => (vec![], vec![]),
        };
        for s in start {
            src.push_str(s);
            src.push('\n');
        }
        for n in &names[..depth] {
            src.push_str(&format!("do {n} = 1, n\n"));
        }
        src.push_str("begin body\nx = 1\nend body\n");
        for _ in 0..depth {
            src.push_str("enddo\n");
        }
        for e in end {
            src.push_str(e);
            src.push('\n');
        }
        parse_kernel(&src).unwrap()
    }

    #[test]
    fn ten_candidates_for_quadruple_loop() {
        let e = enumerate_variants(&gkv()).unwrap();
        let coords: Vec<_> = e.variants.iter().map(|v| v.coords()).collect();
        assert_eq!(
            coords,
            vec![
                (1, 1),
                (1, 2),
                (1, 3),
                (1, 4),
                (2, 1),
                (2, 2),
                (2, 3),
                (3, 1),
                (3, 2),
                (4, 1)
            ]
        );
        assert_eq!(e.baseline().coords(), (1, 2));
        assert_eq!(e.variants.iter().filter(|v| v.baseline).count(), 1);
        assert!(e.warnings.is_empty());
    }

    #[test]
    fn count_law_against_brute_force() {
        for n in 1..=5 {
            let mut expected = Vec::new();
            for g in 1..=n {
                for d in 1..=n {
                    if d <= n - g + 1 {
                        expected.push((g, d));
                    }
                }
            }
            let e = enumerate_variants(&simple(n, "both")).unwrap();
            let got: Vec<_> = e.variants.iter().map(|v| v.coords()).collect();
            assert_eq!(got, expected);
            assert_eq!(got.len(), n * (n + 1) / 2);
            assert_eq!(
                enumerate_variants(&simple(n, "fusion"))
                    .unwrap()
                    .variants
                    .len(),
                n
            );
            assert_eq!(
                enumerate_variants(&simple(n, "exchange"))
                    .unwrap()
                    .variants
                    .len(),
                n
            );
            assert_eq!(
                enumerate_variants(&simple(n, "none"))
                    .unwrap()
                    .variants
                    .len(),
                1
            );
        }
        assert_eq!(
            enumerate_variants(&simple(3, "both"))
                .unwrap()
                .variants
                .len(),
            6
        );
    }

    #[test]
    fn directive_migrates_onto_fused_loop() {
        // source directive on depth 2; fusion only
        let mut k = gkv();
        k.directives.retain(|d| d.kind == DirectiveKind::LoopFusion);
        let e = enumerate_variants(&k).unwrap();
        let coords: Vec<_> = e.variants.iter().map(|v| v.coords()).collect();
        assert_eq!(coords, vec![(1, 2), (2, 2), (3, 2), (4, 1)]);
    }

    #[test]
    fn exchange_depth_list_with_warnings() {
        let mut k = gkv();
        for d in &mut k.directives {
            if d.kind == DirectiveKind::Exchange {
                d.depths = vec![3];
            }
        }
        let e = enumerate_variants(&k).unwrap();
        let coords: Vec<_> = e.variants.iter().map(|v| v.coords()).collect();
        // depth 3 does not exist once three or four loops are fused
        assert_eq!(coords, vec![(1, 2), (1, 3), (2, 3)]);
        assert_eq!(e.warnings.len(), 2);
    }

    #[test]
    fn private_sets() {
        let k = gkv();
        let params = k.param_map();
        let g1 = build_collapse(&k.nest, &params, 1).unwrap();
        assert_eq!(compute_private_set(&k.nest, 1, &g1), vec!["iz", "mx", "my"]);
        assert!(compute_private_set(&k.nest, 4, &g1).is_empty());
        let g2 = build_collapse(&k.nest, &params, 2).unwrap();
        assert_eq!(compute_private_set(&k.nest, 3, &g2), vec!["mx", "my"]);
        assert_eq!(
            compute_private_set(&k.nest, 2, &g2),
            vec!["mx", "my", "mx_my"]
        );
        assert_eq!(
            compute_private_set(&k.nest, 1, &g2),
            vec!["iz", "mx", "my", "mx_my"]
        );
        let g3 = build_collapse(&k.nest, &params, 3).unwrap();
        assert_eq!(compute_private_set(&k.nest, 2, &g3), vec!["iz", "mx", "my"]);
        assert_eq!(
            compute_private_set(&k.nest, 1, &g3),
            vec!["iz", "mx", "my", "iz_mx_my"]
        );
        let g4 = build_collapse(&k.nest, &params, 4).unwrap();
        assert_eq!(
            compute_private_set(&k.nest, 1, &g4),
            vec!["iv", "iz", "mx", "my"]
        );
    }

    #[test]
    fn labels() {
        let e = enumerate_variants(&gkv()).unwrap();
        let label = |g, d| e.by_coords(g, d).unwrap().label.clone();
        assert_eq!(label(1, 2), "Original loop");
        assert_eq!(label(1, 1), "Directive to the outer-most loop");
        assert_eq!(label(1, 3), "Directive to the third loop from the outside");
        assert_eq!(label(1, 4), "Directive to the innermost loop");
        assert_eq!(label(2, 2), "xy collapse");
        assert_eq!(label(3, 2), "zxy collapse");
        assert_eq!(
            label(2, 1),
            "Directive to the outer-most loop and xy collapse"
        );
        assert_eq!(
            label(4, 1),
            "Directive to the outer-most loop and vzxy collapse"
        );
    }

    #[test]
    fn empty_loop_untunable() {
        let mut k = simple(2, "both");
        k.params[0].1 = 0;
        assert!(matches!(
            enumerate_variants(&k),
            Err(TransformError::Untunable { .. })
        ));
    }

    #[test]
    fn fused_name_clash() {
        let src = "kernel t\nparam n = 3\nparam i_j = 1\n!oat$ install LoopFusion region start\n\
                   do i = 1, n\ndo j = 1, n\nbegin body\nx\nend body\nenddo enddo\n\
                   !oat$ install LoopFusion region end\n";
        let k = parse_kernel(src).unwrap();
        assert!(matches!(
            enumerate_variants(&k),
            Err(TransformError::NameClash(_))
        ));
    }
}
