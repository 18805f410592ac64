use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::frontend::Kernel;

use super::TunerError;

/// Fixed context of a tuning run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicParams {
    pub kernel: String,
    pub params: BTreeMap<String, i64>,
    pub max_threads: usize,
    pub env: String,
}

impl BasicParams {
    pub fn new(
        kernel: &Kernel,
        max_threads: usize,
        env: impl Into<String>,
    ) -> Result<Self, TunerError> {
        if max_threads == 0 {
            return Err(TunerError::InvalidMaxThreads);
        }
        Ok(BasicParams {
            kernel: kernel.name.clone(),
            params: kernel.param_map(),
            max_threads,
            env: env.into(),
        })
    }

    /// Stable key: SHA-256 over kernel name, sorted bindings, maximum thread
    /// count and environment tag, truncated to 16 bytes of hex.
    pub fn signature(&self) -> String {
        let mut canon = String::new();
        let _ = writeln!(canon, "kernel={}", self.kernel);
        for (k, v) in &self.params {
            let _ = writeln!(canon, "param {k}={v}");
        }
        let _ = writeln!(canon, "max_threads={}", self.max_threads);
        let _ = writeln!(canon, "env={}", self.env);
        let digest = Sha256::digest(canon.as_bytes());
        hex::encode(&digest[..16])
    }
}

/// One point of the search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PerformanceParams {
    pub variant_id: u32,
    pub threads: usize,
}
