use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::params::{BasicParams, PerformanceParams};
use super::select::select_best;
use super::sweep::Measurement;
use super::TunerError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: schema version {found}, expected {expected}")]
    SchemaVersion {
        path: PathBuf,
        expected: u32,
        found: u64,
    },
    #[error("{path}: corrupt tuning result: {message}")]
    Corrupt { path: PathBuf, message: String },
}

/// One persisted tuning outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub schema_version: u32,
    pub bp: BasicParams,
    pub best: PerformanceParams,
    pub table: Vec<Measurement>,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

impl TuningResult {
    pub fn new(bp: BasicParams, table: Vec<Measurement>) -> Result<Self, TunerError> {
        let best = select_best(&table)?;
        Ok(TuningResult {
            schema_version: SCHEMA_VERSION,
            bp,
            best,
            table,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    pub fn signature(&self) -> String {
        self.bp.signature()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tuning result serializes");
        s.push('\n');
        s
    }

    /// Median cost of `pp` in the table, if measured successfully.
    pub fn cost_of(&self, pp: &PerformanceParams) -> Option<f64> {
        self.table
            .iter()
            .find(|m| m.pp == *pp && m.is_ok())?
            .aggregate
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn result_path(dir: &Path, signature: &str) -> PathBuf {
    dir.join(format!("{signature}.json"))
}

/// Writes `<dir>/<signature>.json` under an exclusive lock, through a
/// temporary file and rename.
pub fn persist(result: &TuningResult, dir: &Path) -> Result<PathBuf, StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let sig = result.signature();
    let path = result_path(dir, &sig);
    let lock_path = dir.join(format!("{sig}.lock"));
    let lock = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&lock_path)
        .map_err(io_err(&lock_path))?;
    lock.lock().map_err(io_err(&lock_path))?;

    let tmp = dir.join(format!("{sig}.json.tmp{}", std::process::id()));
    let write = || -> io::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(result.to_json().as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, &path)
    };
    let out = write().map_err(io_err(&path));
    if out.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    let _ = lock.unlock();
    out.map(|()| path)
}

/// Reads the result for `signature`; `Ok(None)` when none is stored.
pub fn lookup(signature: &str, dir: &Path) -> Result<Option<TuningResult>, StoreError> {
    let path = result_path(dir, signature);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(&path)(e)),
    };
    let corrupt = |message: String| StoreError::Corrupt {
        path: path.clone(),
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(StoreError::SchemaVersion {
            path,
            expected: SCHEMA_VERSION,
            found,
        });
    }
    let result: TuningResult = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    if result.signature() != signature {
        return Err(corrupt(format!(
            "stored parameters hash to {}, not {signature}",
            result.signature()
        )));
    }
    match select_best(&result.table) {
        Ok(best) if best == result.best => Ok(Some(result)),
        Ok(best) => Err(corrupt(format!(
            "best is variant {} at {} threads but the table minimum is variant {} at {}",
            result.best.variant_id, result.best.threads, best.variant_id, best.threads
        ))),
        Err(e) => Err(corrupt(e.to_string())),
    }
}
