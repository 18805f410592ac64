//! Fortran candidate emission.
//!
//! Every variant becomes its own subroutine taking the thread count as
//! `NumThread`. The subroutine sets the OpenMP thread count on entry and
//! restores the configured maximum before returning. A dispatcher routes to
//! the tuned candidate, and a timing entry point sweeps all of them.

mod text;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::frontend::{BoundExpr, Kernel};
use crate::transform::{enumerate_variants, Enumeration, TransformError, Variant};

pub use text::{normalize_source, wrap_line, LINE_WIDTH};

/// Name of the thread-count argument of every candidate.
pub const THREAD_SLOT: &str = "NumThread";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedCandidate {
    pub variant_id: u32,
    pub group_size: usize,
    pub directive_depth: usize,
    pub baseline: bool,
    pub subroutine_name: String,
    pub source_text: String,
    pub thread_slot: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CodegenError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub fn subroutine_name(kernel: &Kernel, variant: &Variant) -> String {
    let (g, d) = variant.coords();
    format!("{}_v{g}_{d}", kernel.name)
}

fn length_text(bounds: &(BoundExpr, BoundExpr)) -> String {
    BoundExpr::length_text(&bounds.0, &bounds.1)
}

/// Source text of each recovery assignment, outer to inner.
fn recovery_lines(variant: &Variant) -> Vec<String> {
    let c = &variant.collapse;
    let lengths: Vec<String> = c.member_bounds.iter().map(length_text).collect();
    (0..c.size)
        .map(|j| {
            let inner = &lengths[j + 1..];
            let numer = match inner.len() {
                0 => format!("({}-1)", c.fused_name),
                1 => format!("({}-1)/{}", c.fused_name, inner[0]),
                _ => format!("({}-1)/({})", c.fused_name, inner.join("*")),
            };
            format!(
                "{} = mod({numer}, {}) + {}",
                c.member_names[j],
                lengths[j],
                c.member_bounds[j].0.atom()
            )
        })
        .collect()
}

fn push_wrapped(out: &mut String, line: &str) {
    for l in wrap_line(line) {
        out.push_str(&l);
        out.push('\n');
    }
}

fn params_module(kernel: &Kernel) -> String {
    format!("{}_params", kernel.name)
}

fn data_module(kernel: &Kernel) -> Option<String> {
    (!kernel.body_arrays().is_empty()).then(|| format!("{}_data", kernel.name))
}

/// Emits one candidate subroutine.
pub fn emit_candidate(kernel: &Kernel, variant: &Variant, max_threads: usize) -> EmittedCandidate {
    let name = subroutine_name(kernel, variant);
    let c = &variant.collapse;
    let d = variant.directive_depth;
    let mut s = String::new();

    let _ = writeln!(s, "subroutine {name}({THREAD_SLOT})");
    let _ = writeln!(s, "  use omp_lib");
    let _ = writeln!(s, "  use {}", params_module(kernel));
    if let Some(m) = data_module(kernel) {
        let _ = writeln!(s, "  use {m}");
    }
    let _ = writeln!(s, "  implicit none");
    let _ = writeln!(s, "  integer, intent(in) :: {THREAD_SLOT}");
    let mut locals: Vec<String> = kernel.nest.iter().map(|h| h.index.clone()).collect();
    if !c.is_identity() {
        locals.push(c.fused_name.clone());
    }
    push_wrapped(&mut s, &format!("  integer :: {}", locals.join(", ")));
    let _ = writeln!(s, "  call omp_set_num_threads({THREAD_SLOT})");

    let post_depth = c.start_depth;
    let directive = if variant.private_set.is_empty() {
        "!$OMP parallel do".to_string()
    } else {
        format!(
            "!$OMP parallel do private({})",
            variant.private_set.join(", ")
        )
    };
    for level in 1..=post_depth {
        let pad = "  ".repeat(level);
        if level == d {
            push_wrapped(&mut s, &format!("{pad}{directive}"));
        }
        if level == post_depth && !c.is_identity() {
            let lengths: Vec<String> = c.member_bounds.iter().map(length_text).collect();
            push_wrapped(
                &mut s,
                &format!("{pad}do {} = 1, {}", c.fused_name, lengths.join("*")),
            );
            for r in recovery_lines(variant) {
                push_wrapped(&mut s, &format!("{pad}  {r}"));
            }
        } else {
            let h = &kernel.nest[level - 1];
            push_wrapped(
                &mut s,
                &format!("{pad}do {} = {}, {}", h.index, h.lower.atom(), h.upper),
            );
        }
    }
    let body_pad = "  ".repeat(post_depth + 1);
    for l in &kernel.body {
        if l.is_empty() {
            s.push('\n');
        } else {
            let _ = writeln!(s, "{body_pad}{l}");
        }
    }
    for level in (1..=post_depth).rev() {
        let pad = "  ".repeat(level);
        let _ = writeln!(s, "{pad}enddo");
        if level == d {
            let _ = writeln!(s, "{pad}!$OMP end parallel do");
        }
    }
    let _ = writeln!(s, "  call omp_set_num_threads({max_threads})");
    let _ = writeln!(s, "  return");
    let _ = writeln!(s, "end subroutine {name}");

    EmittedCandidate {
        variant_id: variant.id,
        group_size: c.size,
        directive_depth: d,
        baseline: variant.baseline,
        subroutine_name: name,
        source_text: s,
        thread_slot: THREAD_SLOT.to_string(),
    }
}

/// Emits the routine that calls the tuned candidate. Unknown ids fall back to
/// the baseline at `max_threads`.
pub fn emit_dispatcher(
    kernel: &Kernel,
    candidates: &[EmittedCandidate],
    max_threads: usize,
) -> String {
    let name = format!("{}_dispatch", kernel.name);
    let mut s = String::new();
    let _ = writeln!(s, "subroutine {name}(best_variant, best_threads)");
    let _ = writeln!(s, "  implicit none");
    let _ = writeln!(s, "  integer, intent(in) :: best_variant, best_threads");
    match candidates {
        [] => {}
        [only] => {
            let _ = writeln!(s, "  call {}(best_threads)", only.subroutine_name);
        }
        many => {
            let fallback = many.iter().find(|c| c.baseline).unwrap_or(&many[0]);
            let _ = writeln!(s, "  select case (best_variant)");
            for c in many {
                let _ = writeln!(s, "  case ({})", c.variant_id);
                let _ = writeln!(s, "    call {}(best_threads)", c.subroutine_name);
            }
            let _ = writeln!(s, "  case default");
            let _ = writeln!(s, "    call {}({max_threads})", fallback.subroutine_name);
            let _ = writeln!(s, "  end select");
        }
    }
    let _ = writeln!(s, "end subroutine {name}");
    s
}

/// Emits the timing entry point: every candidate at every ladder thread
/// count, `reps` calls each, keeping the fastest total. Ties keep the fewer
/// threads, then the lower variant id.
fn emit_harness(kernel: &Kernel, candidates: &[EmittedCandidate], max_threads: usize) -> String {
    let name = format!("{}_autotune", kernel.name);
    let ids: Vec<String> = candidates
        .iter()
        .map(|c| c.variant_id.to_string())
        .collect();
    let baseline = candidates
        .iter()
        .find(|c| c.baseline)
        .or(candidates.first())
        .map_or(0, |c| c.variant_id);
    let mut s = String::new();
    push_wrapped(
        &mut s,
        &format!("subroutine {name}(nladder, ladder, reps, best_variant, best_threads)"),
    );
    let _ = writeln!(s, "  use omp_lib");
    let _ = writeln!(s, "  implicit none");
    let _ = writeln!(s, "  integer, intent(in) :: nladder, reps");
    let _ = writeln!(s, "  integer, intent(in) :: ladder(nladder)");
    let _ = writeln!(s, "  integer, intent(out) :: best_variant, best_threads");
    push_wrapped(
        &mut s,
        &format!(
            "  integer, parameter :: ids({}) = (/ {} /)",
            ids.len(),
            ids.join(", ")
        ),
    );
    let _ = writeln!(s, "  integer :: ic, it, r");
    let _ = writeln!(s, "  double precision :: t0, elapsed, best_time");
    let _ = writeln!(s, "  best_time = huge(1.0d0)");
    let _ = writeln!(s, "  best_variant = {baseline}");
    let _ = writeln!(s, "  best_threads = {max_threads}");
    let _ = writeln!(s, "  do it = 1, nladder");
    let _ = writeln!(s, "    do ic = 1, {}", ids.len());
    let _ = writeln!(s, "      t0 = omp_get_wtime()");
    let _ = writeln!(s, "      do r = 1, reps");
    let _ = writeln!(
        s,
        "        call {}_dispatch(ids(ic), ladder(it))",
        kernel.name
    );
    let _ = writeln!(s, "      enddo");
    let _ = writeln!(s, "      elapsed = omp_get_wtime() - t0");
    let _ = writeln!(s, "      if (elapsed < best_time) then");
    let _ = writeln!(s, "        best_time = elapsed");
    let _ = writeln!(s, "        best_variant = ids(ic)");
    let _ = writeln!(s, "        best_threads = ladder(it)");
    let _ = writeln!(s, "      endif");
    let _ = writeln!(s, "    enddo");
    let _ = writeln!(s, "  enddo");
    let _ = writeln!(s, "end subroutine {name}");
    s
}

/// In-memory form of a generated suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suite {
    pub candidates: Vec<EmittedCandidate>,
    pub source: String,
    pub manifest: String,
}

pub fn render_suite(kernel: &Kernel, enumeration: &Enumeration, max_threads: usize) -> Suite {
    let candidates: Vec<EmittedCandidate> = enumeration
        .variants
        .iter()
        .map(|v| emit_candidate(kernel, v, max_threads))
        .collect();
    let mut src = String::new();
    let _ = writeln!(src, "! Tuning candidates for kernel '{}'.", kernel.name);
    let _ = writeln!(src, "! Generated by oatforge; do not edit.");
    let _ = writeln!(src);
    let _ = writeln!(src, "module {}", params_module(kernel));
    let _ = writeln!(src, "  implicit none");
    for (p, v) in &kernel.params {
        let _ = writeln!(src, "  integer, parameter :: {p} = {v}");
    }
    let _ = writeln!(src, "end module {}", params_module(kernel));
    for c in &candidates {
        src.push('\n');
        let _ = writeln!(
            src,
            "! variant {}: g={} d={}",
            c.variant_id, c.group_size, c.directive_depth
        );
        src.push_str(&c.source_text);
    }
    src.push('\n');
    src.push_str(&emit_dispatcher(kernel, &candidates, max_threads));
    src.push('\n');
    src.push_str(&emit_harness(kernel, &candidates, max_threads));

    let mut manifest = String::new();
    for c in &candidates {
        let _ = writeln!(
            manifest,
            "{}\t{}\t{}\t{}",
            c.variant_id, c.group_size, c.directive_depth, c.subroutine_name
        );
    }
    Suite {
        candidates,
        source: src,
        manifest,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteFiles {
    pub source_path: PathBuf,
    pub manifest_path: PathBuf,
    pub enumeration: Enumeration,
}

/// Writes `<outdir>/<kernel>_candidates.f90` and `<outdir>/<kernel>_manifest`.
pub fn emit_suite(
    kernel: &Kernel,
    max_threads: usize,
    outdir: &Path,
) -> Result<SuiteFiles, CodegenError> {
    let enumeration = enumerate_variants(kernel)?;
    let suite = render_suite(kernel, &enumeration, max_threads);
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CodegenError::Io { path, source }
    };
    fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    let source_path = outdir.join(format!("{}_candidates.f90", kernel.name));
    let manifest_path = outdir.join(format!("{}_manifest", kernel.name));
    fs::write(&source_path, &suite.source).map_err(io_err(&source_path))?;
    fs::write(&manifest_path, &suite.manifest).map_err(io_err(&manifest_path))?;
    Ok(SuiteFiles {
        source_path,
        manifest_path,
        enumeration,
    })
}
