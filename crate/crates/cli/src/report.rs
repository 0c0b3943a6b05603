//! JSON run reports: one schema-tagged object per invocation, with input
//! digests so a report can be tied back to the exact files it was computed
//! from. Reports are deterministic for fixed inputs and seed, except for the
//! wall-clock entries under `timings_ms`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const REPORT_SCHEMA: &str = "wlstrees/run-report/v1";
pub const ERROR_SCHEMA: &str = "wlstrees/error/v1";

#[derive(Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateReport>,
    pub warnings: Vec<String>,
    pub timings_ms: BTreeMap<&'static str, f64>,
}

impl RunReport {
    pub fn new(command: &'static str, inputs: Vec<InputDigest>) -> Self {
        RunReport {
            schema: REPORT_SCHEMA,
            command,
            argv: std::env::args().collect(),
            inputs,
            estimate: None,
            check: None,
            simulate: None,
            warnings: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest(path: &Path, bytes: &[u8]) -> InputDigest {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let sha256 = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    InputDigest {
        path: path.display().to_string(),
        sha256,
    }
}

#[derive(Serialize)]
pub struct EstimateReport {
    /// Echo of the resolved variance model.
    pub variance: String,
    /// Route that produced the lengths: `closed-form`, `collapsed`, or
    /// `dense-fallback`.
    pub method: &'static str,
    pub tree_length: f64,
    pub weighted_rss: f64,
    pub edges: Vec<EdgeReport>,
}

#[derive(Serialize)]
pub struct EdgeReport {
    /// Canonical split: sorted labels of the side away from the
    /// lexicographically smallest leaf.
    pub split: Vec<String>,
    pub length: f64,
}

#[derive(Serialize)]
pub struct CheckReport {
    pub mode: &'static str,
    pub tolerance: f64,
    pub pass: bool,
    /// Quartets (fourpoint) or leaf pairs (semimult, iip) examined.
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<Finding>,
    pub offenders: Vec<Finding>,
}

/// One offending configuration, with only the fields the mode defines.
#[derive(Serialize)]
pub struct Finding {
    /// Leaves involved: a quartet, a minor's quadruple, or a pair.
    pub leaves: Vec<String>,
    /// The edge under test (`iip` only), as a canonical split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<Vec<String>>,
    /// Inferred quartet split (`fourpoint` only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    /// Raw BLUE coefficient on the pair (`iip` only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<f64>,
    pub relative_violation: f64,
}

#[derive(Serialize)]
pub struct SimulateReport {
    pub model: &'static str,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seqlen: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    pub leaves: usize,
    pub out_dist: String,
    pub out_var: String,
}

pub fn error_json(kind: &str, exit_code: i32, message: &str) -> String {
    #[derive(Serialize)]
    struct ErrorReport<'a> {
        schema: &'static str,
        kind: &'a str,
        exit_code: i32,
        message: &'a str,
    }
    serde_json::to_string(&ErrorReport {
        schema: ERROR_SCHEMA,
        kind,
        exit_code,
        message,
    })
    .expect("error serialization cannot fail")
}

/// Wall-clock phase timer feeding `timings_ms`.
pub struct Timings {
    started: Instant,
    last: Instant,
    marks: BTreeMap<&'static str, f64>,
}

impl Timings {
    pub fn start() -> Self {
        let now = Instant::now();
        Timings {
            started: now,
            last: now,
            marks: BTreeMap::new(),
        }
    }

    /// Records the time since the previous mark under `label`.
    pub fn mark(&mut self, label: &'static str) {
        let now = Instant::now();
        self.marks
            .insert(label, now.duration_since(self.last).as_secs_f64() * 1e3);
        self.last = now;
    }

    pub fn finish(mut self) -> BTreeMap<&'static str, f64> {
        self.marks.insert(
            "total",
            self.started.elapsed().as_secs_f64() * 1e3,
        );
        self.marks
    }
}
