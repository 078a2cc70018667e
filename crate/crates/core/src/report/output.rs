//! Run reports, timings and the file manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{GHVerdict, PerturbationFit};
use crate::error::{Error, Result};
use crate::fourier::DecayReport;
use crate::params::Tolerances;
use crate::solver::SolveSummary;
use crate::triangular::ConditionReport;

use super::config::RunConfig;
use super::ext_f64;

/// A result together with the operation and tolerances that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Claim<T> {
    pub operation: &'static str,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub result: T,
}

impl<T> Claim<T> {
    pub fn new(operation: &'static str, tol: &Tolerances, names: &[&'static str], result: T) -> Self {
        let all = serde_json::to_value(tol).expect("tolerances serialize");
        let tolerances = names.iter().map(|&n| (n, all[n].as_f64().unwrap_or(f64::NAN))).collect();
        Claim { operation, tolerances, result }
    }
}

/// Summary of a lattice triangularization.
#[derive(Debug, Clone, Serialize)]
pub struct TriangularSummary {
    pub modes: usize,
    pub excluded_count: usize,
    /// Excluded frequencies with the reason, at most [`LIST_CAP`] of them.
    pub excluded: Vec<crate::triangular::smooth::ExcludedMode>,
    pub undefined: Vec<Vec<i64>>,
    /// `max |S^{-1} Q S - (Lambda + N)|_F / max |Q|_F` over all modes.
    #[serde(serialize_with = "ext_f64::serialize")]
    pub max_residual: f64,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub max_inverse_error: f64,
    /// Largest entry of the twist `B = S^{-1} D_t S`.
    #[serde(serialize_with = "ext_f64::serialize")]
    pub max_twist: f64,
    /// `B` vanishes to rounding (`max_twist <= resid_tol`).
    pub twist_vanishes: bool,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub max_nilpotency_defect: f64,
}

/// Longest list of frequencies echoed in a summary.
pub const LIST_CAP: usize = 64;

/// Decay class of a solution, or why it could not be estimated.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum DecayOutcome {
    Report(DecayReport),
    Unavailable { unavailable: String },
}

/// One row of the bundled example matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub passed: bool,
}

/// Error detail printed on standard error and stored in the report.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorDetail {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Vec<i64>>,
}

impl ErrorDetail {
    pub fn from_error(e: &Error, witnesses: Vec<Vec<i64>>) -> Self {
        ErrorDetail { error: e.kind(), message: e.to_string(), exit_code: exit_code(e), witnesses }
    }
}

/// Exit code of a bundled example suite with at least one mismatch.
pub const EXIT_MISMATCH: i32 = 3;

/// `2` for mathematical precondition failures, `1` otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_precondition() {
        2
    } else {
        1
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: &'static str,
    /// Resolved configuration; absent for the bundled example suite.
    pub config: Option<RunConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triangular: Option<Claim<TriangularSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<Claim<ConditionReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Claim<GHVerdict>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Claim<PerturbationFit>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<Claim<SolveSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<Claim<DecayOutcome>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub examples: Option<Vec<ExampleOutcome>>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorDetail>,
    /// Files written next to the report, relative to the output directory.
    pub files: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Self::with_config(command, Some(config))
    }

    pub fn with_config(command: &str, config: Option<RunConfig>) -> Self {
        RunReport {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            triangular: None,
            conditions: None,
            verdict: None,
            perturbation: None,
            solve: None,
            decay: None,
            examples: None,
            warnings: Vec::new(),
            error: None,
            files: Vec::new(),
        }
    }
}

/// Wall-clock seconds per stage; kept out of the report so reports are
/// byte-identical across runs.
#[derive(Debug, Default)]
pub struct Timings {
    start: Option<Instant>,
    pub stages: BTreeMap<String, f64>,
}

impl Timings {
    pub fn new() -> Self {
        Timings { start: Some(Instant::now()), stages: BTreeMap::new() }
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.stages.insert(stage.into(), t0.elapsed().as_secs_f64());
        out
    }

    fn finish(&self) -> BTreeMap<String, f64> {
        let mut s = self.stages.clone();
        if let Some(t0) = self.start {
            s.insert("total".into(), t0.elapsed().as_secs_f64());
        }
        s
    }
}

/// A file produced by a command, not yet written.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Self> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        Ok(Artifact { name: name.into(), bytes })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub format: String,
    pub bytes: u64,
}

/// Names of the fixed outputs of every run.
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Write the artifacts, `report.json`, `timings.json` and `manifest.json`
/// into `dir`. Returns the manifest path.
pub fn write_run(dir: &Path, report: &mut RunReport, artifacts: Vec<Artifact>, timings: &Timings) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    report.files = artifacts.iter().map(|a| a.name.clone()).collect();
    report.files.extend([REPORT_FILE.to_string(), TIMINGS_FILE.to_string()]);
    let rep = Artifact::json(REPORT_FILE, report)?;
    let tim = Artifact::json(TIMINGS_FILE, &timings.finish())?;
    for a in artifacts.iter().chain([&rep, &tim]) {
        let path = dir.join(&a.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, &a.bytes)?;
        let format = Path::new(&a.name).extension().and_then(|e| e.to_str()).unwrap_or("").to_string();
        entries.push(ManifestEntry { path: a.name.clone(), format, bytes: a.bytes.len() as u64 });
    }
    let manifest = Artifact::json(MANIFEST_FILE, &entries)?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, &manifest.bytes)?;
    Ok(path)
}
