use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use exomask_bench::config::ExperimentConfig;
use exomask_bench::report::{emit_report, load_run, Format};
use exomask_bench::verify::{run_all, VerifyOptions};
use exomask_bench::{datasets, run_experiment, write_outputs, BenchError};
use exomask_core::domains::{DomainSpec, PRESETS};
use exomask_core::estimation::{collect_exo_rollouts, collect_full_rollouts, Behavior};

#[derive(Parser)]
#[command(name = "exomask", version, about = "Mask search for MDPs with exogenous variables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (default: `runs/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override any config key, e.g. `--set search.n_rollouts=100`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_trials: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long, env = "EXOMASK_WORKERS")]
        workers: Option<usize>,
    },
    /// Build comparison tables and objective curves from run directories.
    Report {
        #[arg(required = false)]
        records: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Print the built-in domain presets.
    ListPresets {
        /// Also print each preset's full spec as TOML.
        #[arg(long)]
        verbose: bool,
    },
    /// Run the theorem, condition-checker, estimator and domain checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
    /// Write a rollout dataset to CSV for reuse via `[datasets]`.
    Collect {
        #[arg(long)]
        preset: String,
        #[arg(long, value_enum)]
        kind: DatasetKind,
        #[arg(long, default_value_t = 1000)]
        rollouts: usize,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Exo,
    Full,
}

fn split_override(raw: &str) -> Result<(String, String), BenchError> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| BenchError::Config(format!("override `{raw}` is not KEY=VALUE")))
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run {
            config,
            out,
            set,
            seed,
            n_trials,
            lambda,
            algorithm,
            workers,
        } => {
            let mut overrides = set.iter().map(|s| split_override(s)).collect::<Result<Vec<_>, _>>()?;
            if let Some(s) = seed {
                overrides.push(("seed".into(), s.to_string()));
            }
            if let Some(n) = n_trials {
                overrides.push(("n_trials".into(), n.to_string()));
            }
            if let Some(l) = lambda {
                overrides.push(("lambda".into(), format!("{l:?}")));
            }
            if let Some(a) = algorithm {
                overrides.push(("algorithm".into(), format!("\"{a}\"")));
            }
            let config = ExperimentConfig::load(&config, &overrides)?;
            let workers = workers.unwrap_or_else(default_workers);
            let output = run_experiment(&config, workers)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("runs").join(&config.name));
            write_outputs(&output, &config, &dir)?;
            let agg = &output.record.aggregate;
            println!(
                "{}: {} ok, {} failed, mean return {}, modal mask {} ({}x) -> {}",
                config.name,
                agg.n_ok,
                agg.n_failed,
                agg.mean_return.map_or("-".into(), |x| format!("{x:.4}")),
                agg.modal_mask.as_ref().map_or("-".into(), |m| m.to_string()),
                agg.modal_count,
                dir.display()
            );
        }
        Command::Report { records, format, out } => {
            let runs = records.iter().map(|p| load_run(p)).collect::<Result<Vec<_>, _>>()?;
            let format = match format {
                ReportFormat::Csv => Format::Csv,
                ReportFormat::Json => Format::Json,
                ReportFormat::Markdown => Format::Markdown,
            };
            for path in emit_report(&runs, format, &out)? {
                println!("{}", path.display());
            }
        }
        Command::ListPresets { verbose } => {
            for name in PRESETS {
                println!("{name}");
                if verbose {
                    let spec = DomainSpec::preset(name).expect("listed preset");
                    let text = toml::to_string(&spec).map_err(|e| BenchError::Config(e.to_string()))?;
                    for line in text.lines() {
                        println!("    {line}");
                    }
                }
            }
        }
        Command::Verify { seed, instances } => {
            let opts = VerifyOptions {
                seed,
                instances,
                ..VerifyOptions::default()
            };
            let checks = run_all(&opts)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(BenchError::Verification(format!("failed: {}", failed.join(", "))));
            }
        }
        Command::Collect {
            preset,
            kind,
            rollouts,
            horizon,
            seed,
            out,
        } => {
            let spec = DomainSpec::preset(&preset)
                .ok_or_else(|| BenchError::Config(format!("unknown domain preset `{preset}`")))?;
            let mdp = spec.build()?;
            match kind {
                DatasetKind::Exo => {
                    datasets::save_exo(&collect_exo_rollouts(mdp.as_ref(), rollouts, horizon, seed)?, &out)?
                }
                DatasetKind::Full => datasets::save_full(
                    &collect_full_rollouts(mdp.as_ref(), Behavior::UniformRandom, rollouts, horizon, seed)?,
                    &out,
                )?,
            }
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
