//! Experiment harness: flat config files, named experiments, JSON/CSV reports.

pub mod config;
pub mod experiments;
pub mod report;

use std::fs::{self, File};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use config::{Config, ConfigError, Experiment, ExperimentSpec};
use report::{write_summary, ExperimentReport, RunInfo};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] martlab_core::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid experiment setup: {0}")]
    Spec(String),
    #[error("sweep over {0:?} has no values")]
    EmptySweep(String),
    #[error("sweep must look like `key=v1;v2;...`, got {0:?}")]
    SweepSyntax(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One parameter varied over a list of values, each run on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<String>,
}

impl Sweep {
    /// Parses `key=v1;v2;...`. Values are separated by `;` so that list
    /// values such as `p=4/3,2;3` stay expressible.
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        let (key, rest) = s.split_once('=').ok_or_else(|| HarnessError::SweepSyntax(s.to_string()))?;
        let key = key.trim().to_string();
        let values: Vec<String> = rest.split(';').map(str::trim).filter(|v| !v.is_empty()).map(str::to_string).collect();
        if values.is_empty() {
            return Err(HarnessError::EmptySweep(key));
        }
        Ok(Sweep { key, values })
    }
}

/// Runs one experiment and stamps the report with timing metadata.
pub fn execute(spec: &ExperimentSpec, dump_dir: Option<&Path>) -> Result<ExperimentReport, HarnessError> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let records = experiments::run_experiment(spec, dump_dir)?;
    Ok(ExperimentReport {
        experiment: spec.experiment.name().to_string(),
        version: VERSION,
        fingerprint: spec.fingerprint(),
        spec: spec.clone(),
        records,
        run: RunInfo { started_unix, wall_time_s: started.elapsed().as_secs_f64() },
    })
}

/// Runs the experiment once, or once per sweep value, writing `report.json`
/// (per run) and `summary.csv` under `out`.
pub fn run(experiment: Experiment, cfg: &Config, sweep: Option<&Sweep>, out: &Path) -> Result<Vec<ExperimentReport>, HarnessError> {
    fs::create_dir_all(out)?;
    let mut reports = Vec::new();
    let mut settings = Vec::new();
    match sweep {
        None => {
            let spec = ExperimentSpec::resolve(experiment, cfg)?;
            let report = execute(&spec, Some(out))?;
            report.write_json(&out.join("report.json"))?;
            reports.push(report);
            settings.push(String::new());
        }
        Some(sw) => {
            if sw.values.is_empty() {
                return Err(HarnessError::EmptySweep(sw.key.clone()));
            }
            // resolve every point first so a bad value fails before any work
            let specs = sw
                .values
                .iter()
                .map(|v| {
                    let mut c = cfg.clone();
                    c.set(&sw.key, v.as_str())?;
                    ExperimentSpec::resolve(experiment, &c)
                })
                .collect::<Result<Vec<_>, _>>()?;
            for (i, (spec, v)) in specs.iter().zip(&sw.values).enumerate() {
                let dir = out.join(format!("run-{i:02}"));
                fs::create_dir_all(&dir)?;
                let report = execute(spec, Some(&dir))?;
                report.write_json(&dir.join("report.json"))?;
                reports.push(report);
                settings.push(format!("{}={v}", sw.key));
            }
        }
    }
    write_summary(&reports, &settings, File::create(out.join("summary.csv"))?)?;
    Ok(reports)
}

/// Process exit status for a finished run: 1 if any gated record failed.
pub fn exit_code(reports: &[ExperimentReport]) -> u8 {
    u8::from(!reports.iter().all(ExperimentReport::passed))
}
