//! Run reports: everything needed to reproduce and audit one invocation.

use std::time::Instant;

use rug::Rational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;

/// Wall-clock duration of one pipeline stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

/// Record of one run.
///
/// Apart from `timings`, every field is a deterministic function of the
/// command line, the input bytes and the configuration, so re-running the
/// recorded command reproduces the report; [`RunReport::same_outcome`]
/// compares two reports on exactly those fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    /// Command-line arguments after the program name.
    pub command: Vec<String>,
    /// SHA-256 (hex) of each input file, in the order they were read.
    pub input_digests: Vec<String>,
    /// Every calibrated constant in effect.
    pub config: Config,
    /// Stage-specific derived parameters.
    pub parameters: serde_json::Value,
    /// The result, exact (`num/den`) when the stage produces a rational.
    pub value: Option<String>,
    pub value_f64: Option<f64>,
    /// Files holding detailed traces of this run.
    pub traces: Vec<String>,
    pub timings: Vec<StageTiming>,
}

impl RunReport {
    pub fn new(command: Vec<String>, config: &Config) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            input_digests: Vec::new(),
            config: config.clone(),
            parameters: serde_json::Value::Null,
            value: None,
            value_f64: None,
            traces: Vec::new(),
            timings: Vec::new(),
        }
    }

    /// Records the digest of an input file.
    pub fn add_input(&mut self, bytes: &[u8]) {
        self.input_digests.push(sha256_hex(bytes));
    }

    pub fn set_value(&mut self, v: &Rational) {
        self.value = Some(v.to_string());
        self.value_f64 = Some(v.to_f64());
    }

    /// Runs `f`, recording its duration under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }

    /// Equality on every field except the timings.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self {
            timings: Vec::new(),
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
