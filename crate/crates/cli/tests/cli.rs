use std::fs;
use std::path::Path;
use std::process::Command;

use martlab::config::{Config, Experiment};
use martlab::report::Verdict;
use martlab::{run, HarnessError, Sweep};

fn config(text: &str) -> Config {
    Config::parse(text).unwrap()
}

fn without_run_info(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("run");
    v
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn riesz_norm_default_record() {
    let dir = tempfile::tempdir().unwrap();
    let reports = run(Experiment::RieszNorm, &config("seed = 1\n"), None, dir.path()).unwrap();
    let r = &reports[0].records[0];
    assert!((r.estimate - 0.5).abs() < 1e-9, "{}", r.estimate);
    assert_eq!(r.bound, Some(1.0));
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("summary.csv").exists());
}

#[test]
fn constants_report_pstar() {
    let dir = tempfile::tempdir().unwrap();
    let reports = run(Experiment::Constants, &config("seed = 1\np = 2, 4\n"), None, dir.path()).unwrap();
    let get = |name: &str| reports[0].records.iter().find(|r| r.name == name).unwrap().estimate;
    assert_eq!(get("p*-1 p=2"), 1.0);
    assert_eq!(get("p*-1 p=4"), 3.0);
    assert!(reports[0].passed());
}

#[test]
fn rerun_is_identical_apart_from_run_info() {
    let cfg = config("seed = 11\npaths = 2000\nsteps = 50\n");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(Experiment::ProjectCompare, &cfg, None, a.path()).unwrap();
    run(Experiment::ProjectCompare, &cfg, None, b.path()).unwrap();
    assert_eq!(without_run_info(&a.path().join("report.json")), without_run_info(&b.path().join("report.json")));
    assert_eq!(fs::read(a.path().join("summary.csv")).unwrap(), fs::read(b.path().join("summary.csv")).unwrap());
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = config("seed = 5\npaths = 3000\nsteps = 40\nensembles = 2\n");
    for experiment in [Experiment::Bdg, Experiment::ProjectCompare, Experiment::TransformSim] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        in_pool(1, || run(experiment, &cfg, None, a.path()).unwrap());
        in_pool(3, || run(experiment, &cfg, None, b.path()).unwrap());
        assert_eq!(fs::read(a.path().join("summary.csv")).unwrap(), fs::read(b.path().join("summary.csv")).unwrap(), "{experiment}");
    }
}

#[test]
fn empty_sweep_is_an_error() {
    assert!(matches!(Sweep::parse("p="), Err(HarnessError::EmptySweep(_))));
    assert!(matches!(Sweep::parse("p= ; "), Err(HarnessError::EmptySweep(_))));
    let dir = tempfile::tempdir().unwrap();
    let sweep = Sweep { key: "p".into(), values: vec![] };
    assert!(matches!(run(Experiment::Constants, &config("seed = 1\n"), Some(&sweep), dir.path()), Err(HarnessError::EmptySweep(_))));
}

#[test]
fn sweep_writes_one_row_per_check() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = Sweep::parse("p=4/3;2;3;4").unwrap();
    let reports = run(Experiment::RieszNorm, &config("seed = 1\n"), Some(&sweep), dir.path()).unwrap();
    assert_eq!(reports.len(), 4);
    let rows = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap().records().count();
    assert_eq!(rows, reports.iter().map(|r| r.records.len()).sum::<usize>());
    // the p=2 run carries the extra symbol-supremum record
    assert_eq!(rows, 5);
    for i in 0..4 {
        assert!(dir.path().join(format!("run-{i:02}/report.json")).exists());
    }
}

#[test]
fn pairing_se_halves_with_four_times_the_paths() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = Sweep::parse("paths=4000;16000").unwrap();
    let cfg = config("seed = 3\nsteps = 50\n");
    let reports = run(Experiment::ProjectCompare, &cfg, Some(&sweep), dir.path()).unwrap();
    let se = |i: usize| reports[i].records.iter().find(|r| r.name.starts_with("E[I f(Y_T)]")).unwrap().se.unwrap();
    let ratio = se(0) / se(1);
    assert!((1.7..2.3).contains(&ratio), "SE ratio {ratio}");
}

#[test]
fn bad_inputs_are_rejected() {
    assert!("transform".parse::<Experiment>().is_err());
    let dir = tempfile::tempdir().unwrap();
    assert!(run(Experiment::Constants, &config("dim = 2\n"), None, dir.path()).is_err());
    assert!(run(Experiment::RieszNorm, &config("seed = 1\np = 1\n"), None, dir.path()).is_err());
}

#[test]
fn exit_status_for_success_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "seed = 2\n").unwrap();
    let bin = env!("CARGO_BIN_EXE_martlab");
    let status = |args: &[&str]| Command::new(bin).args(args).status().unwrap().code();
    let out = dir.path().join("out");
    let (cfg, out) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(status(&["constants", "--config", cfg, "--out", out, "--p", "4/3,3"]), Some(0));
    assert_eq!(status(&["no-such-experiment", "--config", cfg, "--out", out]), Some(2));
    assert_eq!(status(&["constants", "--config", cfg, "--out", out, "--sweep", "p="]), Some(2));
    assert_eq!(status(&["subordination", "--config", cfg, "--out", out, "--paths", "200"]), Some(0));
}

#[test]
fn exit_code_is_one_only_for_gated_failures() {
    use martlab::report::Record;
    let dir = tempfile::tempdir().unwrap();
    let mut reports = run(Experiment::Constants, &config("seed = 1\n"), None, dir.path()).unwrap();
    assert_eq!(martlab::exit_code(&reports), 0);
    reports[0].records.push(Record::new("report only", 1.0, "test"));
    assert_eq!(martlab::exit_code(&reports), 0);
    reports[0].records.push(Record::new("gated", 1.0, "test").gate(false));
    assert_eq!(martlab::exit_code(&reports), 1);
}
