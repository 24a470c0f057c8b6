use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::error;

use perturblab::experiment::{
    bench_speed_run, evaluate_run, report_run, robustness_run, train_run, ExperimentConfig,
    TrainOptions,
};
use perturblab::perturb::PerturbationStrategy;

/// Train and compare sequence-to-sequence models under training-time
/// perturbations.
#[derive(Parser)]
#[command(name = "perturblab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes config, metrics, checkpoint and test scores.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also fill the wall_s column of metrics.csv (breaks byte-identical reruns).
        #[arg(long)]
        record_timing: bool,
    },
    /// Score a checkpoint on the test split of its run.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on corrupted test sources at several ratios.
    Robustness {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated ratios, e.g. 0,0.01,0.05,0.1 (default: from the run config).
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure training throughput of several strategies, one after another.
    BenchSpeed {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated names: none, wdrop, rep_uni, rep_sim, rep_ss, adv,
        /// each optionally suffixed with :enc, :dec or :both.
        #[arg(long, value_delimiter = ',', required = true)]
        strategies: Vec<String>,
        /// Timed steps per strategy, after warmup.
        #[arg(long, default_value_t = 200)]
        steps: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate several run directories into one comparison table.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Run whose throughput the speed ratios are relative to.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            out,
            record_timing,
        } => {
            let cfg = load(&config)?;
            print!("{}", cfg.to_toml()?);
            let r = train_run(&cfg, &out, TrainOptions { record_timing })?;
            println!(
                "\ntest: token_acc {:.4}  seq_acc {:.4}  bleu {:.4}  ({} examples)",
                r.test.token_accuracy, r.test.sequence_accuracy, r.test.bleu, r.test.n_examples
            );
        }
        Command::Evaluate { checkpoint, out } => {
            let e = evaluate_run(&checkpoint, &out)?;
            println!(
                "token_acc {:.4}  seq_acc {:.4}  bleu {:.4}  ({} examples)",
                e.token_accuracy, e.sequence_accuracy, e.bleu, e.n_examples
            );
        }
        Command::Robustness {
            checkpoint,
            ratios,
            out,
        } => {
            let table = robustness_run(&checkpoint, ratios.as_deref(), &out)?;
            println!("ratio   token_acc  seq_acc  bleu");
            for (ratio, e) in &table.rows {
                println!(
                    "{ratio:<7} {:<10.4} {:<8.4} {:.4}",
                    e.token_accuracy, e.sequence_accuracy, e.bleu
                );
            }
        }
        Command::BenchSpeed {
            config,
            strategies,
            steps,
            out,
        } => {
            let cfg = load(&config)?;
            let parsed = strategies
                .iter()
                .map(|s| {
                    PerturbationStrategy::from_name(s.trim())
                        .with_context(|| format!("strategy `{s}`"))
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = bench_speed_run(&cfg, &parsed, steps, &out)?;
            println!("strategy  position  tokens/s  ×baseline");
            for r in &rows {
                println!(
                    "{:<9} {:<9} {:<9.0} ×{:.2}",
                    r.strategy, r.position, r.tokens_per_sec, r.ratio_vs_baseline
                );
            }
        }
        Command::Report {
            runs,
            baseline,
            out,
        } => {
            if runs.is_empty() {
                bail!("--runs needs at least one directory");
            }
            let rows = report_run(&runs, baseline.as_deref(), &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
