//! Kernel file frontend.
//!
//! A kernel file holds a preamble of parameter bindings followed by one
//! perfectly nested, rectangular `do` nest annotated with `!oat$` tuning
//! directives and at most one `!$omp parallel do`. See `docs/kernel-format.md`
//! for the grammar.

mod bound;
mod parse;
mod print;

use std::collections::BTreeMap;
use std::fmt;

pub use bound::{parse_bound, BoundExpr, BoundSyntaxError};
pub use parse::{parse_kernel, validate_region_nesting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DirectiveKind {
    Exchange,
    LoopFusion,
}

impl fmt::Display for DirectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectiveKind::Exchange => f.write_str("Exchange"),
            DirectiveKind::LoopFusion => f.write_str("LoopFusion"),
        }
    }
}

/// Inclusive 1-based source line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    pub fn contains(&self, other: &LineSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn disjoint(&self, other: &LineSpan) -> bool {
        self.end < other.start || other.end < self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveSpec {
    pub kind: DirectiveKind,
    /// Candidate directive depths for `Exchange`; empty means every depth.
    pub depths: Vec<usize>,
    pub region: LineSpan,
    /// Loop depths enclosed by the region, inclusive.
    pub loops: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopHeader {
    pub index: String,
    pub lower: BoundExpr,
    pub upper: BoundExpr,
    pub depth: usize,
}

impl LoopHeader {
    /// Trip count under the given bindings, `upper - lower + 1`.
    pub fn length(&self, params: &BTreeMap<String, i64>) -> Option<i64> {
        let lo = self.lower.eval(params)?;
        let hi = self.upper.eval(params)?;
        hi.checked_sub(lo)?.checked_add(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    pub name: String,
    /// Parameter bindings in declaration order.
    pub params: Vec<(String, i64)>,
    /// Outermost loop first.
    pub nest: Vec<LoopHeader>,
    /// Opaque body lines, common indentation removed.
    pub body: Vec<String>,
    pub body_reads: Vec<String>,
    pub body_writes: Vec<String>,
    pub directives: Vec<DirectiveSpec>,
    /// Depth carrying the source `!$omp parallel do`, if one was written.
    pub parallel_depth: Option<usize>,
}

impl Kernel {
    pub fn depth(&self) -> usize {
        self.nest.len()
    }

    pub fn param_map(&self) -> BTreeMap<String, i64> {
        self.params.iter().cloned().collect()
    }

    /// Directive depth of the untransformed code. Defaults to the outermost
    /// loop when the source carries no OpenMP directive.
    pub fn original_depth(&self) -> usize {
        self.parallel_depth.unwrap_or(1)
    }

    pub fn directive(&self, kind: DirectiveKind) -> Option<&DirectiveSpec> {
        self.directives.iter().find(|d| d.kind == kind)
    }

    /// Evaluated `(lower, length)` of every loop, outermost first.
    pub fn extents(&self) -> Option<Vec<(i64, i64)>> {
        let params = self.param_map();
        self.nest
            .iter()
            .map(|h| Some((h.lower.eval(&params)?, h.length(&params)?)))
            .collect()
    }

    /// Every array named in the body declarations, reads first, no repeats.
    pub fn body_arrays(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in self.body_reads.iter().chain(&self.body_writes) {
            if !out.contains(a) {
                out.push(a.clone());
            }
        }
        out
    }

    /// Equality ignoring source line positions of directive regions.
    pub fn same_structure(&self, other: &Kernel) -> bool {
        let strip = |k: &Kernel| {
            let mut k = k.clone();
            for d in &mut k.directives {
                d.region = LineSpan { start: 0, end: 0 };
            }
            k
        };
        strip(self) == strip(other)
    }

    /// Copy of this kernel whose loops run over literal ranges of the given
    /// lengths, keeping each loop's evaluated lower bound.
    pub fn with_lengths(&self, lengths: &[i64]) -> Option<Kernel> {
        if lengths.len() != self.nest.len() {
            return None;
        }
        let extents = self.extents()?;
        let mut k = self.clone();
        for ((h, &(lo, _)), &len) in k.nest.iter_mut().zip(&extents).zip(lengths) {
            h.lower = BoundExpr::literal(lo);
            h.upper = BoundExpr::literal(lo.checked_add(len)?.checked_sub(1)?);
        }
        Some(k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("non-rectangular nest: bound of loop '{index}' references loop index '{referenced}'")]
    NonRectangular { index: String, referenced: String },
    #[error("unbound parameter '{0}'")]
    UnboundParameter(String),
    #[error("overlapping regions: {first} and {second} partially overlap")]
    OverlappingRegions { first: String, second: String },
    #[error("duplicate index name '{0}'")]
    DuplicateIndex(String),
    #[error("imperfect nest: {0}")]
    ImperfectNest(String),
    #[error("invalid directive: {0}")]
    InvalidDirective(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, col {col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}
