use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use martlab::config::{Config, Experiment};
use martlab::{exit_code, run, HarnessError, Sweep};

/// Run a martlab experiment and write report.json and summary.csv.
#[derive(Debug, Parser)]
#[command(name = "martlab", version)]
struct Cli {
    /// One of: constants, transform-sim, subordination, bdg, matrix-bdg,
    /// lenglart, martingale-check, project-compare, prop35, riesz-norm,
    /// choi-riesz, bilinear, laplace-mult, su2.
    experiment: String,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Comma-separated exponents, e.g. `4/3,2,4`.
    #[arg(long)]
    p: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Run once per value: `key=v1;v2;...`.
    #[arg(long)]
    sweep: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match body(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("martlab: {e}");
            ExitCode::from(2)
        }
    }
}

fn body(cli: &Cli) -> Result<u8, HarnessError> {
    let experiment: Experiment = cli.experiment.parse()?;
    let mut cfg = Config::parse(&fs::read_to_string(&cli.config)?)?;
    if let Some(s) = cli.seed {
        cfg.set("seed", s.to_string())?;
    }
    if let Some(n) = cli.paths {
        cfg.set("paths", n.to_string())?;
    }
    if let Some(g) = cli.grid {
        cfg.set("grid", g.to_string())?;
    }
    if let Some(p) = &cli.p {
        cfg.set("p", p.as_str())?;
    }
    let sweep = cli.sweep.as_deref().map(Sweep::parse).transpose()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        pool = pool.num_threads(w.max(1));
    }
    let pool = pool.build().map_err(|e| HarnessError::Spec(e.to_string()))?;
    let reports = pool.install(|| run(experiment, &cfg, sweep.as_ref(), &cli.out))?;
    for r in &reports {
        for rec in r.failures() {
            eprintln!("FAIL {}: {} (estimate {:e})", r.experiment, rec.name, rec.estimate);
        }
    }
    let code = exit_code(&reports);
    println!("{} run(s), {} -> {}", reports.len(), if code == 0 { "PASS" } else { "FAIL" }, cli.out.display());
    Ok(code)
}
