use std::path::Path;
use std::process::{Command, Output};

fn exomask(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exomask"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EXOMASK_WORKERS")
        .output()
        .unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

#[test]
fn lists_the_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = exomask(&["list-presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), ["gridworld-small", "crowd-desk", "factory-desk"]);
}

#[test]
fn errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let v = error_line(&exomask(&["run", "missing.toml"], dir.path()));
    assert_eq!(v["error"]["kind"], "io");

    std::fs::write(dir.path().join("bad.toml"), "algorithm = \"greedy\"\n[domain]\npreset = \"moon\"\n").unwrap();
    let v = error_line(&exomask(&["run", "bad.toml"], dir.path()));
    assert_eq!(v["error"]["kind"], "config");
    assert!(v["error"]["message"].as_str().unwrap().contains("moon"));

    std::fs::write(dir.path().join("exo.csv"), "not a dataset\n").unwrap();
    let v = error_line(&exomask(&["report", "exo.csv"], dir.path()));
    assert_eq!(v["error"]["kind"], "format");
}

#[test]
fn flags_override_file_keys_and_workers_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "name = \"exp\"\nalgorithm = \"greedy\"\nlambda = 0.5\nn_trials = 9\n\
         [domain]\npreset = \"factory-desk\"\n[search]\nn_rollouts = 50\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_exomask"))
        .args(["run", "exp.toml", "--n-trials", "2", "--lambda", "0.25", "--set", "search.exo_rollouts=100"])
        .env("EXOMASK_WORKERS", "3")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("runs/exp");
    let config = std::fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(config.contains("n_trials = 2"));
    assert!(config.contains("lambda = 0.25"));
    assert!(config.contains("exo_rollouts = 100"));
    let timings: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("timings.json")).unwrap()).unwrap();
    assert_eq!(timings["workers"], 3);
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("results.json")).unwrap()).unwrap();
    assert_eq!(results["trials"].as_array().unwrap().len(), 2);

    let out = exomask(&["report", "runs/exp", "--format", "csv", "--out", "rep"], dir.path());
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.path().join("rep/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().starts_with("exp,factory-desk,greedy,0.25,2,2,0"));
}

#[test]
fn report_without_records_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    for (format, ext, lines) in [("csv", "csv", 1), ("markdown", "md", 2)] {
        let out = exomask(&["report", "--format", format, "--out", "r"], dir.path());
        assert!(out.status.success());
        let table = std::fs::read_to_string(dir.path().join(format!("r/table.{ext}"))).unwrap();
        assert_eq!(table.lines().count(), lines);
    }
}

#[test]
fn collected_datasets_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = exomask(
        &["collect", "--preset", "gridworld-small", "--kind", "full", "--rollouts", "3", "--horizon", "5", "--seed", "4", "--out", "full.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let data = exomask_bench::datasets::load_full(&dir.path().join("full.csv")).unwrap();
    assert_eq!(data.len(), 15);
    assert_eq!((data.m, data.seed), (5, 4));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = exomask(&["verify", "--instances", "5"], dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
