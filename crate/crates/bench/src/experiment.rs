//! Running configured experiments and writing their result files.
//!
//! A run directory holds:
//!
//! - `results.json`: the [`ResultRecord`]. No wall-clock data, so reruns
//!   with the same config and seed are byte-identical.
//! - `traces.jsonl`: one search trace per trial, wall times removed.
//! - `timings.json`: search-phase wall times per trial.
//! - `config.toml`: the resolved config the run used.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use exomask_core::domains::{DomainSpec, FactoryMdp};
use exomask_core::estimation::{collect_exo_rollouts, ExoRolloutDataset, FullRolloutDataset};
use exomask_core::planner::Clock;
use exomask_core::search::{
    brute_force_with, correlational_with, first_phase_mask, greedy_with, ObjectiveEstimator,
    SearchTrace, TerminalReason, TraceEntry,
};
use exomask_core::seeding::{derive_seed, purpose_seed};
use exomask_core::{Error as CoreError, GenerativeMdp, Mask};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig};
use crate::{datasets, BenchError, Result};

/// Seconds since construction.
#[derive(Clone, Copy, Debug)]
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock { start: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialError {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_return: Option<f64>,
    /// Standard error of `mean_return` over the trial's rollouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<TerminalReason>,
    /// Factory only: assemblies with every task ready.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub successes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<TrialError>,
}

impl TrialRow {
    fn failed(trial: usize, seed: u64, err: &BenchError) -> Self {
        TrialRow {
            trial,
            seed,
            status: TrialStatus::Failed,
            mask: None,
            j_hat: None,
            mean_return: None,
            stderr: None,
            cost: None,
            evaluations: None,
            terminal: None,
            successes: None,
            error: Some(TrialError {
                kind: err.kind().to_string(),
                message: err.to_string(),
            }),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }
}

/// Summary over the successful trials of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_return: Option<f64>,
    /// Standard error of the mean across trials.
    pub stderr_return: Option<f64>,
    pub mean_j_hat: Option<f64>,
    pub mean_mask_size: Option<f64>,
    /// Most frequent mask; ties go to the smaller mask in `Mask` order.
    pub modal_mask: Option<Mask>,
    pub modal_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_successes: Option<u64>,
}

impl Aggregate {
    pub fn from_rows(rows: &[TrialRow]) -> Self {
        let ok: Vec<&TrialRow> = rows.iter().filter(|r| r.is_ok()).collect();
        let n = ok.len();
        let mean = |f: &dyn Fn(&TrialRow) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let mean_return = mean(&|r| r.mean_return);
        let stderr_return = mean_return.filter(|_| n >= 2).map(|mu| {
            let ss: f64 = ok
                .iter()
                .filter_map(|r| r.mean_return)
                .map(|x| (x - mu) * (x - mu))
                .sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        });
        let mut counts: BTreeMap<&Mask, usize> = BTreeMap::new();
        for r in &ok {
            if let Some(mask) = &r.mask {
                *counts.entry(mask).or_insert(0) += 1;
            }
        }
        let modal = counts
            .iter()
            .fold(None, |best: Option<(&Mask, usize)>, (&mask, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((mask, c)),
            });
        let successes: Vec<u64> = ok.iter().filter_map(|r| r.successes).collect();
        Aggregate {
            n_ok: n,
            n_failed: rows.len() - n,
            mean_return,
            stderr_return,
            mean_j_hat: mean(&|r| r.j_hat),
            mean_mask_size: mean(&|r| r.mask.as_ref().map(|m| m.len() as f64)),
            modal_mask: modal.map(|(m, _)| m.clone()),
            modal_count: modal.map_or(0, |(_, c)| c),
            total_successes: (!successes.is_empty()).then(|| successes.iter().sum()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub name: String,
    pub config_hash: String,
    pub domain: String,
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub master_seed: u64,
    pub n_trials: usize,
    pub trials: Vec<TrialRow>,
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub trial: usize,
    pub search_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub config_hash: String,
    pub workers: usize,
    pub total_secs: f64,
    pub mean_search_secs: f64,
    pub trials: Vec<TrialTiming>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub trial: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<SearchTrace>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: ResultRecord,
    pub traces: Vec<TraceLine>,
    pub timings: Timings,
}

struct TrialRun {
    row: TrialRow,
    trace: Option<SearchTrace>,
    search_secs: f64,
}

fn single_entry_trace(mask: &Mask) -> SearchTrace {
    SearchTrace {
        entries: vec![TraceEntry {
            iteration: 0,
            candidate: mask.clone(),
            mi_scores: Vec::new(),
            accepted: true,
            score: None,
        }],
        terminal: TerminalReason::Exhausted,
    }
}

fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
}

fn run_trial(
    config: &ExperimentConfig,
    spec: &DomainSpec,
    cached: Option<&(ExoRolloutDataset, FullRolloutDataset)>,
    trial: usize,
    seed: u64,
) -> Result<TrialRun> {
    let mdp = spec.build()?;
    let mdp: &dyn GenerativeMdp = mdp.as_ref();
    let m = mdp.m();
    let params = &config.search;
    let lambda = config.lambda;
    let clock = WallClock::new();

    let estimator = match cached {
        Some((exo, full)) => {
            ObjectiveEstimator::from_data(mdp, params, exo.clone(), full.clone(), seed, &clock)?
        }
        None => ObjectiveEstimator::new(mdp, params, seed, &clock)?,
    };
    let (mask, mut trace) = match config.algorithm {
        Algorithm::BruteForce => {
            if m > params.brute_force_limit || m >= 64 {
                return Err(CoreError::TooManyVariables {
                    m,
                    limit: params.brute_force_limit.min(63),
                }
                .into());
            }
            brute_force_with(&estimator, m, lambda)?
        }
        Algorithm::Greedy => greedy_with(&estimator, m, lambda, params.greedy_retry, seed)?,
        Algorithm::Correlational => {
            let mi_data = collect_exo_rollouts(
                mdp,
                params.mi_rollouts,
                params.mi_horizon,
                purpose_seed(seed, "mi-exo"),
            )?;
            correlational_with(&estimator, &mi_data, mdp, &config.correlational, lambda, seed)?
        }
        Algorithm::FirstPhaseOnly => {
            let mask = first_phase_mask(mdp, &config.correlational, seed)?;
            let trace = single_entry_trace(&mask);
            (mask, trace)
        }
        Algorithm::FixedMask => {
            let choice = config.fixed_mask.as_ref().expect("validated config");
            let mask = choice.resolve(m)?;
            let trace = single_entry_trace(&mask);
            (mask, trace)
        }
    };
    let search_secs = clock.now();

    let (score, mc) = estimator.score_with_returns(&mask, lambda)?;
    if trace.entries.len() == 1 && trace.entries[0].score.is_none() {
        trace.entries[0].score = Some(score.clone());
    }
    let successes = match spec {
        DomainSpec::Factory(s) => {
            let factory = FactoryMdp::new(s.clone())?;
            let policy = estimator.plan(&mask)?;
            Some(factory.count_successes(
                &policy,
                params.n_rollouts,
                estimator.horizon(),
                estimator.rollout_seed(),
            )?)
        }
        _ => None,
    };
    let row = TrialRow {
        trial,
        seed,
        status: TrialStatus::Ok,
        j_hat: Some(score.j_hat),
        mean_return: Some(score.mean_return),
        stderr: Some(std_error(&mc.per_rollout)),
        cost: Some(score.cost),
        evaluations: Some(trace.evaluations()),
        terminal: Some(trace.terminal),
        successes,
        error: None,
        mask: Some(mask),
    };
    Ok(TrialRun {
        row,
        trace: Some(trace),
        search_secs,
    })
}

fn load_cached(
    config: &ExperimentConfig,
    m: usize,
) -> Result<Option<(ExoRolloutDataset, FullRolloutDataset)>> {
    let Some(files) = &config.datasets else {
        return Ok(None);
    };
    let exo = datasets::load_exo(&files.exo)?;
    let full = datasets::load_full(&files.full)?;
    for (path, dm) in [(&files.exo, exo.m), (&files.full, full.m)] {
        if dm != m {
            return Err(BenchError::format(
                path,
                format!("dataset has m={dm} but the domain has m={m}"),
            ));
        }
    }
    Ok(Some((exo, full)))
}

/// Runs every trial of `config` on `workers` threads. A failing trial is
/// recorded as a failed row and the remaining trials still run. Rows come
/// back in trial order whatever the worker count.
pub fn run_experiment(config: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let spec = config.domain.resolve()?;
    let m = spec.build()?.m();
    let cached = load_cached(config, m)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    let runs: Vec<(usize, u64, Result<TrialRun>)> = pool.install(|| {
        (0..config.n_trials)
            .into_par_iter()
            .map(|trial| {
                let seed = derive_seed(config.seed, trial as u64);
                (trial, seed, run_trial(config, &spec, cached.as_ref(), trial, seed))
            })
            .collect()
    });

    let hash = config.hash();
    let mut rows = Vec::with_capacity(runs.len());
    let mut traces = Vec::with_capacity(runs.len());
    let mut timings = Vec::with_capacity(runs.len());
    for (trial, seed, run) in runs {
        match run {
            Ok(run) => {
                rows.push(run.row);
                traces.push(TraceLine {
                    trial,
                    seed,
                    trace: run.trace,
                });
                timings.push(TrialTiming {
                    trial,
                    search_secs: run.search_secs,
                });
            }
            Err(e) => {
                rows.push(TrialRow::failed(trial, seed, &e));
                traces.push(TraceLine {
                    trial,
                    seed,
                    trace: None,
                });
            }
        }
    }
    let mean_search_secs = if timings.is_empty() {
        0.0
    } else {
        timings.iter().map(|t| t.search_secs).sum::<f64>() / timings.len() as f64
    };
    let aggregate = Aggregate::from_rows(&rows);
    Ok(RunOutput {
        record: ResultRecord {
            name: config.name.clone(),
            config_hash: hash.clone(),
            domain: config.domain.preset.clone(),
            algorithm: config.algorithm,
            lambda: config.lambda,
            master_seed: config.seed,
            n_trials: config.n_trials,
            trials: rows,
            aggregate,
        },
        traces,
        timings: Timings {
            config_hash: hash,
            workers: workers.max(1),
            total_secs: started.elapsed().as_secs_f64(),
            mean_search_secs,
            trials: timings,
        },
    })
}

fn strip_wall_time(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.remove("wall_time");
            map.values_mut().for_each(strip_wall_time);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| BenchError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("result types serialize");
    s.push('\n');
    s
}

/// Writes `results.json`, `traces.jsonl`, `timings.json` and `config.toml`
/// into `dir`, creating it if needed.
pub fn write_outputs(out: &RunOutput, config: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    write_file(&dir.join("results.json"), &to_json(&out.record))?;
    let mut lines = String::new();
    for line in &out.traces {
        let mut v = serde_json::to_value(line).expect("traces serialize");
        strip_wall_time(&mut v);
        lines.push_str(&v.to_string());
        lines.push('\n');
    }
    write_file(&dir.join("traces.jsonl"), &lines)?;
    write_file(&dir.join("timings.json"), &to_json(&out.timings))?;
    write_file(&dir.join("config.toml"), &config.to_toml())?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<ResultRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::format(path, e.to_string()))
}

/// Reads `traces.jsonl`. Wall times come back as zero.
pub fn read_traces(path: &Path) -> Result<Vec<TraceLine>> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut v: serde_json::Value =
                serde_json::from_str(l).map_err(|e| BenchError::format(path, e.to_string()))?;
            restore_wall_time(&mut v);
            serde_json::from_value(v).map_err(|e| BenchError::format(path, e.to_string()))
        })
        .collect()
}

fn restore_wall_time(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            if map.contains_key("j_hat") && !map.contains_key("wall_time") {
                map.insert("wall_time".into(), 0.0.into());
            }
            map.values_mut().for_each(restore_wall_time);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(restore_wall_time),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, mask: &[usize], ret: f64) -> TrialRow {
        TrialRow {
            trial,
            seed: trial as u64,
            status: TrialStatus::Ok,
            mask: Some(Mask::new(mask.iter().copied(), 8).unwrap()),
            j_hat: Some(ret - mask.len() as f64 * 0.1),
            mean_return: Some(ret),
            stderr: Some(0.0),
            cost: Some(mask.len() as f64),
            evaluations: Some(1),
            terminal: Some(TerminalReason::Exhausted),
            successes: None,
            error: None,
        }
    }

    #[test]
    fn aggregate_modal_mask_breaks_ties_toward_smaller_masks() {
        let rows = vec![row(0, &[1, 2], 1.0), row(1, &[0], 2.0), row(2, &[1, 2], 3.0), row(3, &[0], 4.0)];
        let agg = Aggregate::from_rows(&rows);
        assert_eq!(agg.modal_mask, Some(Mask::new([0], 8).unwrap()));
        assert_eq!(agg.modal_count, 2);
        assert_eq!(agg.mean_return, Some(2.5));
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((agg.stderr_return.unwrap() - sd / 2.0).abs() < 1e-12);
    }

    #[test]
    fn failed_rows_are_excluded_from_means() {
        let err = BenchError::Config("boom".into());
        let rows = vec![row(0, &[0], 1.0), TrialRow::failed(1, 1, &err)];
        let agg = Aggregate::from_rows(&rows);
        assert_eq!((agg.n_ok, agg.n_failed), (1, 1));
        assert_eq!(agg.mean_return, Some(1.0));
        assert_eq!(agg.stderr_return, None);
    }

    #[test]
    fn empty_run_has_no_means() {
        let agg = Aggregate::from_rows(&[]);
        assert_eq!(agg.mean_return, None);
        assert_eq!(agg.modal_mask, None);
        assert_eq!(agg.modal_count, 0);
    }

    #[test]
    fn wall_times_are_stripped_recursively() {
        let mut v = serde_json::json!({"a": {"wall_time": 1.0, "j_hat": 2.0}, "b": [{"wall_time": 3}]});
        strip_wall_time(&mut v);
        assert_eq!(v, serde_json::json!({"a": {"j_hat": 2.0}, "b": [{}]}));
    }
}
