use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "REPORT-ONLY")]
    ReportOnly,
}

impl Verdict {
    pub fn gate(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::ReportOnly => "REPORT-ONLY",
        }
    }
}

/// One numeric check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub tolerance: Option<f64>,
    pub bound: Option<f64>,
    pub verdict: Verdict,
    /// Name of the result the check exercises.
    pub anchor: &'static str,
}

impl Record {
    pub fn new(name: impl Into<String>, estimate: f64, anchor: &'static str) -> Self {
        Record { name: name.into(), estimate, se: None, tolerance: None, bound: None, verdict: Verdict::ReportOnly, anchor }
    }

    pub fn se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn gate(mut self, pass: bool) -> Self {
        self.verdict = Verdict::gate(pass);
        self
    }
}

/// Run metadata that legitimately differs between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub started_unix: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub version: &'static str,
    pub fingerprint: String,
    pub spec: ExperimentSpec,
    pub records: Vec<Record>,
    pub run: RunInfo,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(path, text)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// CSV with one row per record of every report; `settings[i]` labels run `i`.
pub fn write_summary<W: Write>(reports: &[ExperimentReport], settings: &[String], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["run", "setting", "experiment", "name", "estimate", "se", "tolerance", "bound", "verdict", "anchor"])?;
    for (i, r) in reports.iter().enumerate() {
        for rec in &r.records {
            out.write_record([
                i.to_string(),
                settings.get(i).cloned().unwrap_or_default(),
                r.experiment.clone(),
                rec.name.clone(),
                format!("{:e}", rec.estimate),
                opt(rec.se),
                opt(rec.tolerance),
                opt(rec.bound),
                rec.verdict.as_str().to_string(),
                rec.anchor.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
