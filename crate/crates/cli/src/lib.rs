//! Command implementations behind the `oatforge` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use oatforge_core::codegen::{emit_suite, subroutine_name};
use oatforge_core::exec::{run_trace, BuiltinKernel, Workload};
use oatforge_core::tuner::{
    default_ladder, full_ladder, lookup, persist, plan_sweep, resolve, run_sweep, speedup_rows,
    variant_summary, CostProvider, MeasuredProvider, Status, StoreError, SyntheticModel,
    SyntheticProvider, TunerError, DEFAULT_REPS,
};
use oatforge_core::{
    enumerate_variants, parse_kernel, BasicParams, Enumeration, Kernel, TuningResult, Variant,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_MEASURE: i32 = 3;

const DEFAULT_STORE: &str = ".oatforge-store";

#[derive(Debug, Parser)]
#[command(
    name = "oatforge",
    version,
    about = "Generate, tune and dispatch OpenMP loop-nest variants"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the candidate suite and list the variants.
    Generate {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Output directory for the generated Fortran and manifest.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Sweep (variant, thread count) pairs and persist the cheapest.
    Tune {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        store: StoreArgs,
        /// Thread counts: comma-separated list, or `all` for 1..=max.
        /// Defaults to powers of two up to the maximum.
        #[arg(long)]
        threads: Option<ThreadList>,
        /// Timed repetitions per pair; the median is compared.
        #[arg(long, default_value_t = DEFAULT_REPS as u64, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        /// `measured`, `measured:<builtin>` or `synthetic:<inv-threads|fail|bowl:G,D,T>`.
        #[arg(long, default_value = "measured")]
        provider: ProviderSpec,
        /// Executions of the loop per timed repetition (measured provider).
        #[arg(long, default_value_t = 1)]
        iterations: usize,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Print the stored best configuration, or the baseline fallback.
    Best {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Check every variant's iteration trace against the baseline.
    Verify {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Replace loop lengths before checking, e.g. `3,3,3,3`.
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<i64>>,
        /// Thread counts to check.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        threads: Vec<usize>,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Print speedup tables from a stored tuning result.
    Report {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        store: StoreArgs,
        /// Per-variant best thread counts instead of the full table.
        #[arg(long)]
        summary: bool,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Kernel file, or `@gkv-like` / `@stream-like` for a built-in.
    pub kernel: String,
    /// Maximum thread count; defaults to the available parallelism.
    #[arg(long)]
    pub max_threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    /// Directory holding tuning results.
    #[arg(long, env = "OATFORGE_STORE", default_value = DEFAULT_STORE)]
    pub store: PathBuf,
    /// Environment tag mixed into the result signature.
    #[arg(long, default_value = "local")]
    pub env: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ThreadList {
    All,
    List(Vec<usize>),
}

impl FromStr for ThreadList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(ThreadList::All);
        }
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("invalid thread count '{p}'"))
            })
            .collect::<Result<_, _>>()
            .map(ThreadList::List)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderSpec {
    Measured(Option<BuiltinKernel>),
    Synthetic(SyntheticModel),
}

impl FromStr for ProviderSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "measured" {
            return Ok(ProviderSpec::Measured(None));
        }
        if let Some(b) = s.strip_prefix("measured:") {
            return b
                .parse()
                .map(|b| ProviderSpec::Measured(Some(b)))
                .map_err(|e| e.to_string());
        }
        if let Some(m) = s.strip_prefix("synthetic:") {
            return m
                .parse()
                .map(ProviderSpec::Synthetic)
                .map_err(|e| e.to_string());
        }
        Err(format!("unknown provider '{s}'"))
    }
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
    /// Report produced before the failure, if any.
    pub stdout: String,
}

impl Failure {
    fn user(error: anyhow::Error) -> Self {
        Failure::new(EXIT_USER, error)
    }

    fn new(code: i32, error: anyhow::Error) -> Self {
        Failure {
            code,
            error,
            stdout: String::new(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(error: StoreError) -> Self {
        Failure::user(error.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::user(error)
    }
}

/// Output of a command: stdout text plus warnings for stderr.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub warnings: Vec<String>,
}

pub fn load_kernel(spec: &str) -> anyhow::Result<Kernel> {
    let (source, origin) = if let Some(name) = spec.strip_prefix('@') {
        let b: BuiltinKernel = name.parse()?;
        (b.source().to_string(), name.to_string())
    } else {
        let path = Path::new(spec);
        if !path.exists() {
            bail!("{spec}: file not found");
        }
        let text = fs::read_to_string(path).with_context(|| format!("{spec}: cannot read"))?;
        (text, spec.to_string())
    };
    parse_kernel(&source).map_err(|e| anyhow!("{origin}: {e}"))
}

fn max_threads(arg: Option<usize>) -> anyhow::Result<usize> {
    match arg {
        Some(0) => bail!("--max-threads must be at least 1"),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn enumerate(kernel: &Kernel, out: &mut Output) -> anyhow::Result<Enumeration> {
    let e = enumerate_variants(kernel).map_err(|e| anyhow!("{}: {e}", kernel.name))?;
    out.warnings.extend(e.warnings.iter().cloned());
    if e.variants.len() == 1 {
        out.warnings
            .push(format!("{}: nothing to tune", kernel.name));
    }
    Ok(e)
}

/// Renders serializable rows as an aligned table, JSON or CSV.
pub fn render<T: Serialize>(rows: &[T], format: Format) -> anyhow::Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rows)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            Ok(String::from_utf8(w.into_inner()?)?)
        }
        Format::Table => {
            let values: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|r| match serde_json::to_value(r) {
                    Ok(serde_json::Value::Object(m)) => Ok(m),
                    Ok(_) => Err(anyhow!("row is not a record")),
                    Err(e) => Err(e.into()),
                })
                .collect::<anyhow::Result<_>>()?;
            let Some(first) = values.first() else {
                return Ok(String::new());
            };
            let headers: Vec<&String> = first.keys().collect();
            let cell = |v: &serde_json::Value| match v {
                serde_json::Value::Null => "-".to_string(),
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => match n.as_f64() {
                    Some(f) if !n.is_i64() && !n.is_u64() => format!("{f:.6}"),
                    _ => n.to_string(),
                },
                other => other.to_string(),
            };
            let cells: Vec<Vec<String>> = values
                .iter()
                .map(|m| headers.iter().map(|h| cell(&m[h.as_str()])).collect())
                .collect();
            let widths: Vec<usize> = headers
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    cells
                        .iter()
                        .map(|r| r[i].len())
                        .chain([h.len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let mut s = String::new();
            let line = |s: &mut String, items: Vec<&str>| {
                let parts: Vec<String> = items
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect();
                let _ = writeln!(s, "{}", parts.join("  ").trim_end());
            };
            line(&mut s, headers.iter().map(|h| h.as_str()).collect());
            for r in &cells {
                line(&mut s, r.iter().map(String::as_str).collect());
            }
            Ok(s)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantRow {
    pub id: u32,
    pub g: usize,
    pub d: usize,
    pub label: String,
    pub subroutine: String,
    pub baseline: bool,
}

pub fn variant_rows(kernel: &Kernel, e: &Enumeration) -> Vec<VariantRow> {
    e.variants
        .iter()
        .map(|v| VariantRow {
            id: v.id,
            g: v.group_size(),
            d: v.directive_depth,
            label: v.label.clone(),
            subroutine: subroutine_name(kernel, v),
            baseline: v.baseline,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasurementRow {
    pub variant_id: u32,
    pub label: String,
    pub threads: usize,
    pub status: Status,
    pub median_s: Option<f64>,
    pub best: bool,
}

fn measurement_rows(result: &TuningResult, e: &Enumeration) -> Vec<MeasurementRow> {
    result
        .table
        .iter()
        .map(|m| MeasurementRow {
            variant_id: m.pp.variant_id,
            label: e
                .by_id(m.pp.variant_id)
                .map_or_else(String::new, |v| v.label.clone()),
            threads: m.pp.threads,
            status: m.status,
            median_s: m.aggregate,
            best: m.pp == result.best,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BestRow {
    pub variant_id: u32,
    pub threads: usize,
    pub label: String,
    pub source: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub variant_id: u32,
    pub label: String,
    pub threads: String,
    pub status: &'static str,
    pub detail: String,
}

/// First difference between a variant's trace and the baseline's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub threads: usize,
    pub position: usize,
    pub got: Option<Vec<i64>>,
    pub expected: Option<Vec<i64>>,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |t: &Option<Vec<i64>>| {
            t.as_ref().map_or_else(
                || "nothing".to_string(),
                |t| {
                    format!(
                        "({})",
                        t.iter()
                            .map(|x| x.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                },
            )
        };
        write!(
            f,
            "at {} threads, sorted tuple {}: got {}, expected {}",
            self.threads,
            self.position,
            show(&self.got),
            show(&self.expected)
        )
    }
}

/// Compares the tuple multiset of `variant` at each thread count with the
/// single-thread baseline.
pub fn verify_variant(
    kernel: &Kernel,
    baseline: &Variant,
    variant: &Variant,
    threads: &[usize],
) -> anyhow::Result<Option<Mismatch>> {
    let reference = run_trace(kernel, baseline, 1)?;
    let expected = reference.flattened_multiset();
    for &t in threads {
        let trace = run_trace(kernel, variant, t)?;
        let got = trace.flattened_multiset();
        let n = got.len().max(expected.len());
        if let Some(i) = (0..n).find(|&i| got.get(i) != expected.get(i)) {
            return Ok(Some(Mismatch {
                threads: t,
                position: i,
                got: got.get(i).map(|s| s.to_vec()),
                expected: expected.get(i).map(|s| s.to_vec()),
            }));
        }
    }
    Ok(None)
}

pub fn verify_rows(
    kernel: &Kernel,
    variants: &[Variant],
    baseline: &Variant,
    threads: &[usize],
) -> anyhow::Result<(Vec<VerifyRow>, Vec<String>)> {
    let list = threads
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for v in variants {
        let m = verify_variant(kernel, baseline, v, threads)?;
        if let Some(m) = &m {
            failures.push(format!("variant {} ({}) failed {m}", v.id, v.label));
        }
        rows.push(VerifyRow {
            variant_id: v.id,
            label: v.label.clone(),
            threads: list.clone(),
            status: if m.is_some() { "fail" } else { "pass" },
            detail: m.map(|m| m.to_string()).unwrap_or_default(),
        });
    }
    Ok((rows, failures))
}

fn builtin_for(kernel: &Kernel) -> BuiltinKernel {
    if kernel.depth() == 4 && kernel.name == "exb_realspcal" {
        BuiltinKernel::GkvLike
    } else {
        BuiltinKernel::StreamLike
    }
}

/// Runs a command, returning its output or a coded failure.
pub fn run(command: &Command) -> Result<Output, Failure> {
    let mut out = Output::default();
    match command {
        Command::Generate {
            kernel,
            out: dir,
            report,
        } => {
            let k = load_kernel(&kernel.kernel)?;
            let tmax = max_threads(kernel.max_threads)?;
            let files = emit_suite(&k, tmax, dir).map_err(|e| anyhow!("{}: {e}", k.name))?;
            out.warnings
                .extend(files.enumeration.warnings.iter().cloned());
            if files.enumeration.variants.len() == 1 {
                out.warnings.push(format!("{}: nothing to tune", k.name));
            }
            out.stdout = render(&variant_rows(&k, &files.enumeration), report.format)?;
            if report.format == Format::Table {
                let _ = writeln!(
                    out.stdout,
                    "{} candidates written to {}",
                    files.enumeration.variants.len(),
                    files.source_path.display()
                );
            }
        }
        Command::Tune {
            kernel,
            store,
            threads,
            reps,
            provider,
            iterations,
            report,
        } => {
            let k = load_kernel(&kernel.kernel)?;
            let tmax = max_threads(kernel.max_threads)?;
            let e = enumerate(&k, &mut out)?;
            let bp = BasicParams::new(&k, tmax, store.env.clone()).map_err(anyhow::Error::from)?;
            let ladder = match threads {
                None => default_ladder(tmax),
                Some(ThreadList::All) => full_ladder(tmax),
                Some(ThreadList::List(l)) => l.clone(),
            };
            let plan = plan_sweep(&bp, &e.variants, &ladder).map_err(anyhow::Error::from)?;
            out.warnings.extend(plan.warnings.iter().cloned());
            let mut p: Box<dyn CostProvider + '_> = match provider {
                ProviderSpec::Synthetic(m) => Box::new(SyntheticProvider::new(m.clone(), &e)),
                ProviderSpec::Measured(b) => {
                    let b = b.unwrap_or_else(|| builtin_for(&k));
                    let w = Workload::new(b, &k)
                        .map_err(|err| anyhow!("{}: {err}", k.name))?
                        .with_iterations(*iterations);
                    Box::new(MeasuredProvider::new(w, &e, tmax))
                }
            };
            let sweep = match run_sweep(&plan, p.as_mut(), *reps as usize) {
                Ok(s) => s,
                Err(err @ TunerError::NoSuccessfulMeasurements) => {
                    return Err(Failure::new(EXIT_MEASURE, anyhow!("{}: {err}", k.name)))
                }
                Err(err) => return Err(Failure::user(err.into())),
            };
            out.warnings.extend(sweep.warnings);
            let result = TuningResult::new(bp, sweep.measurements).map_err(anyhow::Error::from)?;
            let path = persist(&result, &store.store)?;
            out.stdout = render(&measurement_rows(&result, &e), report.format)?;
            if report.format == Format::Table {
                let label = e
                    .by_id(result.best.variant_id)
                    .map_or("", |v| v.label.as_str());
                let _ = writeln!(
                    out.stdout,
                    "best: variant {} ({label}) at {} threads; stored in {}",
                    result.best.variant_id,
                    result.best.threads,
                    path.display()
                );
            }
        }
        Command::Best {
            kernel,
            store,
            report,
        } => {
            let k = load_kernel(&kernel.kernel)?;
            let tmax = max_threads(kernel.max_threads)?;
            let e = enumerate(&k, &mut out)?;
            let bp = BasicParams::new(&k, tmax, store.env.clone()).map_err(anyhow::Error::from)?;
            let d = resolve(&store.store, &bp, &e)?;
            let row = BestRow {
                variant_id: d.pp.variant_id,
                threads: d.pp.threads,
                label: e
                    .by_id(d.pp.variant_id)
                    .map_or_else(String::new, |v| v.label.clone()),
                source: if d.tuned {
                    "stored"
                } else {
                    "absent -> baseline, Tmax"
                },
            };
            out.stdout = render(&[row], report.format)?;
        }
        Command::Verify {
            kernel,
            lengths,
            threads,
            report,
        } => {
            let mut k = load_kernel(&kernel.kernel)?;
            if let Some(l) = lengths {
                if l.len() != k.depth() {
                    return Err(Failure::user(anyhow!(
                        "--lengths needs {} values, got {}",
                        k.depth(),
                        l.len()
                    )));
                }
                k = k
                    .with_lengths(l)
                    .ok_or_else(|| anyhow!("{}: bounds cannot be evaluated", k.name))?;
            }
            if threads.contains(&0) {
                return Err(Failure::user(anyhow!("thread counts must be at least 1")));
            }
            let e = enumerate(&k, &mut out)?;
            let (rows, failures) = verify_rows(&k, &e.variants, e.baseline(), threads)?;
            out.stdout = render(&rows, report.format)?;
            if !failures.is_empty() {
                return Err(Failure {
                    stdout: out.stdout,
                    ..Failure::new(EXIT_VERIFY, anyhow!(failures.join("\n")))
                });
            }
            if report.format == Format::Table {
                let _ = writeln!(out.stdout, "{0}/{0} variants pass", rows.len());
            }
        }
        Command::Report {
            kernel,
            store,
            summary,
            report,
        } => {
            let k = load_kernel(&kernel.kernel)?;
            let tmax = max_threads(kernel.max_threads)?;
            let e = enumerate(&k, &mut out)?;
            let bp = BasicParams::new(&k, tmax, store.env.clone()).map_err(anyhow::Error::from)?;
            let result = lookup(&bp.signature(), &store.store)?.ok_or_else(|| {
                anyhow!("{}: no tuning result in {}", k.name, store.store.display())
            })?;
            out.stdout = if *summary {
                render(&variant_summary(&result, &e), report.format)?
            } else {
                render(&speedup_rows(&result, &e), report.format)?
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_lists() {
        assert_eq!("all".parse::<ThreadList>().unwrap(), ThreadList::All);
        assert_eq!(
            "1, 2,8".parse::<ThreadList>().unwrap(),
            ThreadList::List(vec![1, 2, 8])
        );
        assert!("1,x".parse::<ThreadList>().is_err());
    }

    #[test]
    fn provider_specs() {
        assert_eq!(
            "measured".parse::<ProviderSpec>().unwrap(),
            ProviderSpec::Measured(None)
        );
        assert_eq!(
            "measured:stream-like".parse::<ProviderSpec>().unwrap(),
            ProviderSpec::Measured(Some(BuiltinKernel::StreamLike))
        );
        assert_eq!(
            "synthetic:inv-threads".parse::<ProviderSpec>().unwrap(),
            ProviderSpec::Synthetic(SyntheticModel::InverseThreads)
        );
        for bad in ["measured:gkv", "synthetic:", "random"] {
            assert!(bad.parse::<ProviderSpec>().is_err(), "{bad}");
        }
    }

    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        n: u32,
        x: Option<f64>,
    }

    #[test]
    fn formats_share_content() {
        let rows = [
            Row {
                name: "a b",
                n: 1,
                x: Some(0.5),
            },
            Row {
                name: "c",
                n: 22,
                x: None,
            },
        ];
        let table = render(&rows, Format::Table).unwrap();
        assert_eq!(table, "name  n   x\na b   1   0.500000\nc     22  -\n");
        assert_eq!(
            render(&rows, Format::Csv).unwrap(),
            "name,n,x\na b,1,0.5\nc,22,\n"
        );
        let json: serde_json::Value =
            serde_json::from_str(&render(&rows, Format::Json).unwrap()).unwrap();
        assert_eq!(json[1]["n"], 22);
        assert_eq!(render::<Row>(&[], Format::Table).unwrap(), "");
    }
}
