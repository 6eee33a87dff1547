//! Serialization of run results: a JSON bundle (the canonical interface)
//! and two fixed-column CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ResolvedModel, RunConfig};
use crate::error::{Error, Result};
use crate::estimators::M1Search;
use crate::experiments::{DriftRow, RunOutput, SuiteReport, Verdict};

/// Version of both the JSON bundle and the CSV column sets.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const REPORTS_CSV: &str = "reports.csv";
pub const DRIFT_CSV: &str = "drift_table.csv";
pub const REPORT_JSON: &str = "report.json";

pub const REPORT_COLUMNS: [&str; 16] = [
    "schema_version",
    "check_id",
    "suite",
    "verdict",
    "estimate",
    "se",
    "ci_lo",
    "ci_hi",
    "threshold",
    "margin",
    "n",
    "censored_fraction",
    "ci_method",
    "seed",
    "config_hash",
    "claim",
];

pub const DRIFT_COLUMNS: [&str; 10] = ["schema_version", "suite", "m", "y_radius", "estimate", "se", "ci_lo", "ci_hi", "n", "verdict"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    /// Hash of config hash, seed and suite list.
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub suites: Vec<String>,
    pub model: ResolvedModel,
    pub m1: f64,
    pub m1_search: Option<M1Search>,
    pub reports: Vec<SuiteReport>,
    pub drift_table: Vec<DriftRow>,
}

impl ReportBundle {
    pub fn new(cfg: &RunConfig, suites: &[String], out: RunOutput) -> Self {
        let config_hash = cfg.config_hash();
        let mut h = Sha256::new();
        h.update(config_hash.as_bytes());
        h.update(cfg.seed.to_le_bytes());
        for s in suites {
            h.update(s.as_bytes());
            h.update([0]);
        }
        let run_id = hex::encode(&h.finalize()[..8]);
        ReportBundle {
            schema_version: REPORT_SCHEMA_VERSION,
            run_id,
            config_hash,
            seed: cfg.seed,
            suites: suites.to_vec(),
            model: out.model,
            m1: out.m1,
            m1_search: out.m1_search,
            reports: out.reports,
            drift_table: out.drift_table,
        }
    }

    /// Checks that are not diagnostics and did not pass.
    pub fn failures(&self) -> impl Iterator<Item = &SuiteReport> {
        self.reports.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    pub fn all_passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle holds only finite numbers");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn reports_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS).expect("in-memory write");
        for r in &self.reports {
            w.write_record([
                REPORT_SCHEMA_VERSION.to_string(),
                r.check_id.clone(),
                r.suite.clone(),
                verdict_str(r.verdict).to_string(),
                r.estimate.to_string(),
                r.se.to_string(),
                r.ci[0].to_string(),
                r.ci[1].to_string(),
                opt(r.threshold),
                opt(r.margin),
                r.n.to_string(),
                r.censored_fraction.to_string(),
                format!("{:?}", r.ci_method).to_lowercase(),
                r.seed.to_string(),
                r.config_hash.clone(),
                r.claim.clone(),
            ])
            .expect("in-memory write");
        }
        into_string(w)
    }

    pub fn drift_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(DRIFT_COLUMNS).expect("in-memory write");
        for r in &self.drift_table {
            w.write_record([
                REPORT_SCHEMA_VERSION.to_string(),
                r.suite.clone(),
                r.m.to_string(),
                r.y_radius.to_string(),
                r.estimate.to_string(),
                r.se.to_string(),
                r.ci_lo.to_string(),
                r.ci_hi.to_string(),
                r.n.to_string(),
                verdict_str(r.verdict).to_string(),
            ])
            .expect("in-memory write");
        }
        into_string(w)
    }

    /// Writes the selected files into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut files = Vec::new();
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            files.push((dir.join(REPORT_JSON), self.to_json()));
        }
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            files.push((dir.join(REPORTS_CSV), self.reports_csv()));
            files.push((dir.join(DRIFT_CSV), self.drift_csv()));
        }
        let mut paths = Vec::new();
        for (path, text) in files {
            fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// One printable line per check.
pub fn verdict_line(r: &SuiteReport) -> String {
    let thr = r.threshold.map(|t| format!(" threshold={t:.6e}")).unwrap_or_default();
    format!(
        "{:<4} {} estimate={:.6e} ci=[{:.6e}, {:.6e}]{} n={}",
        r.verdict.label(),
        r.check_id,
        r.estimate,
        r.ci[0],
        r.ci[1],
        thr,
        r.n
    )
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Diagnostic => "diagnostic",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}
