use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Split};
use super::output::{flush, opt, OutputDir};
use crate::error::{Error, Result};
use crate::eval::{evaluate, robustness_sweep, EvalResult, RobustnessTable};
use crate::model::{load_checkpoint, save_checkpoint, ModelParams};
use crate::perturb::PerturbationStrategy;
use crate::rng::{stream, Stream};
use crate::train::{throughput, train_step, BatchStream, StepMetrics, TrainState, WARMUP_STEPS};

pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const VALID_FILE: &str = "valid.csv";
pub const RESULT_FILE: &str = "result.json";
pub const EVAL_FILE: &str = "eval.csv";
pub const ROBUSTNESS_FILE: &str = "robustness.csv";
pub const SPEED_FILE: &str = "speed.csv";

const METRICS_HEADER: [&str; 9] = [
    "step",
    "wall_s",
    "tokens",
    "nll_clean",
    "nll_perturbed",
    "vat_kl",
    "objective",
    "replaced_src",
    "replaced_tgt",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Fill the `wall_s` column of the metrics file. Off by default so that
    /// identical configs give byte-identical metrics; timings always go to
    /// the separate timing file.
    pub record_timing: bool,
}

/// Summary written next to every trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: String,
    pub position: String,
    pub seed: u64,
    pub steps: u64,
    pub tokens_per_sec: Option<f64>,
    pub final_objective: f64,
    pub test: EvalResult,
}

fn eval_row(step: u64, e: &EvalResult) -> [String; 5] {
    [
        step.to_string(),
        e.token_accuracy.to_string(),
        e.sequence_accuracy.to_string(),
        e.bleu.to_string(),
        e.n_examples.to_string(),
    ]
}

/// Trains `config` from scratch and returns the final parameters and the
/// per-step metrics, without touching the file system.
pub fn train_model(
    config: &ExperimentConfig,
    mut on_step: impl FnMut(&StepMetrics, &ModelParams) -> Result<()>,
) -> Result<(ModelParams, Vec<StepMetrics>)> {
    config.validate()?;
    let seed = config.training.seed;
    let train = config.dataset(Split::Train)?;
    let params = ModelParams::init(&config.model_config(), &mut stream(seed, Stream::Init))?;
    let mut state = TrainState::new(params, config.optimizer());
    let mut perturb_rng = stream(seed, Stream::Perturb);
    let batches = BatchStream::new(
        &train,
        config.training.batch_size,
        stream(seed, Stream::Shuffle),
    )?;
    let mut metrics = Vec::with_capacity(config.training.steps as usize);
    for batch in batches.take(config.training.steps as usize) {
        let m = train_step(&mut state, &batch, &config.strategy, &mut perturb_rng)?;
        on_step(&m, &state.params)?;
        metrics.push(m);
    }
    Ok((state.params, metrics))
}

/// `train`: writes the resolved config, per-step metrics and timings,
/// optional validation scores, the checkpoint and a result summary.
pub fn train_run(
    config: &ExperimentConfig,
    out: &Path,
    options: TrainOptions,
) -> Result<RunResult> {
    config.validate()?;
    let dir = OutputDir::create(out)?;
    match train_into(config, &dir, options) {
        Ok(r) => {
            dir.finish()?;
            Ok(r)
        }
        Err(e) => Err(dir.fail(e)),
    }
}

fn train_into(
    config: &ExperimentConfig,
    dir: &OutputDir,
    options: TrainOptions,
) -> Result<RunResult> {
    dir.write_text(CONFIG_FILE, &config.to_toml()?)?;
    let valid = match config.eval.eval_every {
        0 => None,
        _ => Some(config.dataset(Split::Valid)?),
    };
    let mut metrics_csv = csv::Writer::from_writer(dir.create_file(METRICS_FILE)?);
    metrics_csv.write_record(METRICS_HEADER)?;
    let mut timing_csv = csv::Writer::from_writer(dir.create_file(TIMING_FILE)?);
    timing_csv.write_record(["step", "wall_s", "tokens"])?;
    let mut valid_csv = match &valid {
        Some(_) => {
            let mut w = csv::Writer::from_writer(dir.create_file(VALID_FILE)?);
            w.write_record(["step", "token_acc", "seq_acc", "bleu", "n_examples"])?;
            Some(w)
        }
        None => None,
    };
    let total = config.training.steps;
    let (params, metrics) = train_model(config, |m, params| {
        let wall = m.seconds.to_string();
        metrics_csv.write_record([
            m.step.to_string(),
            if options.record_timing {
                wall.clone()
            } else {
                String::new()
            },
            m.tokens.to_string(),
            opt(m.loss.clean),
            m.loss.perturbed.to_string(),
            opt(m.loss.vat),
            m.loss.objective.to_string(),
            m.replaced_src.to_string(),
            m.replaced_tgt.to_string(),
        ])?;
        timing_csv.write_record([m.step.to_string(), wall, m.tokens.to_string()])?;
        let done = m.step + 1;
        if let (Some(ds), Some(w)) = (&valid, valid_csv.as_mut()) {
            if done % config.eval.eval_every == 0 || done == total {
                let e = evaluate(params, ds)?;
                info!(
                    "step {done}: valid token_acc {:.4} seq_acc {:.4}",
                    e.token_accuracy, e.sequence_accuracy
                );
                w.write_record(eval_row(done, &e))?;
            }
        }
        if done % 100 == 0 || done == total {
            info!("step {done}/{total}: objective {:.5}", m.loss.objective);
        }
        Ok(())
    })?;
    flush(
        metrics_csv
            .into_inner()
            .map_err(|e| Error::io(dir.join(METRICS_FILE), e.into_error()))?,
        &dir.join(METRICS_FILE),
    )?;
    flush(
        timing_csv
            .into_inner()
            .map_err(|e| Error::io(dir.join(TIMING_FILE), e.into_error()))?,
        &dir.join(TIMING_FILE),
    )?;
    if let Some(w) = valid_csv {
        flush(
            w.into_inner()
                .map_err(|e| Error::io(dir.join(VALID_FILE), e.into_error()))?,
            &dir.join(VALID_FILE),
        )?;
    }

    let ckpt = dir.join(CHECKPOINT_FILE);
    save_checkpoint(&params, &ckpt)?;
    if load_checkpoint(&ckpt)? != params {
        return Err(Error::Checkpoint(format!(
            "{} does not read back identically",
            ckpt.display()
        )));
    }

    let test = evaluate(&params, &config.dataset(Split::Test)?)?;
    info!(
        "test: token_acc {:.4} seq_acc {:.4} bleu {:.4}",
        test.token_accuracy, test.sequence_accuracy, test.bleu
    );
    let result = RunResult {
        strategy: config.strategy.label(),
        position: config.strategy.position_label(),
        seed: config.training.seed,
        steps: config.training.steps,
        tokens_per_sec: throughput(&metrics).ok(),
        final_objective: metrics.last().map_or(f64::NAN, |m| m.loss.objective),
        test,
    };
    let mut f = dir.create_file(RESULT_FILE)?;
    serde_json::to_writer_pretty(&mut f, &result)?;
    flush(f, &dir.join(RESULT_FILE))?;
    Ok(result)
}

/// Loads a checkpoint and the config stored beside it.
pub fn load_run(checkpoint: &Path) -> Result<(ExperimentConfig, ModelParams)> {
    let dir = checkpoint
        .parent()
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let params = load_checkpoint(checkpoint)?;
    if params.config() != &config.model_config() {
        return Err(Error::Checkpoint(format!(
            "{} does not match the model in {}",
            checkpoint.display(),
            dir.join(CONFIG_FILE).display()
        )));
    }
    Ok((config, params))
}

/// `evaluate`: scores the checkpoint on its run's test split.
pub fn evaluate_run(checkpoint: &Path, out: &Path) -> Result<EvalResult> {
    let (config, params) = load_run(checkpoint)?;
    let dir = OutputDir::create(out)?;
    let run = || -> Result<EvalResult> {
        let e = evaluate(&params, &config.dataset(Split::Test)?)?;
        let mut w = csv::Writer::from_writer(dir.create_file(EVAL_FILE)?);
        w.write_record(["token_acc", "seq_acc", "bleu", "n_examples"])?;
        w.write_record(&eval_row(0, &e)[1..])?;
        w.flush()
            .map_err(|err| Error::io(dir.join(EVAL_FILE), err))?;
        Ok(e)
    };
    match run() {
        Ok(e) => dir.finish().map(|_| e),
        Err(e) => Err(dir.fail(e)),
    }
}

/// `robustness`: corrupted-source sweep of the checkpoint on its test split.
pub fn robustness_run(
    checkpoint: &Path,
    ratios: Option<&[f64]>,
    out: &Path,
) -> Result<RobustnessTable> {
    let (config, params) = load_run(checkpoint)?;
    let dir = OutputDir::create(out)?;
    let run = || -> Result<RobustnessTable> {
        let ratios = ratios.unwrap_or(&config.eval.ratios);
        let test = config.dataset(Split::Test)?;
        let table = robustness_sweep(
            &params,
            &test,
            ratios,
            config.eval.corruption,
            config.training.seed,
        )?;
        let mut f = dir.create_file(ROBUSTNESS_FILE)?;
        table.write_csv(&mut f)?;
        flush(f, &dir.join(ROBUSTNESS_FILE))?;
        Ok(table)
    };
    match run() {
        Ok(t) => dir.finish().map(|_| t),
        Err(e) => Err(dir.fail(e)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedRow {
    pub strategy: String,
    pub position: String,
    pub tokens_per_sec: f64,
    pub ratio_vs_baseline: f64,
}

/// Times `steps` post-warmup training steps for each strategy, one after
/// another, from identical initial weights and batch order. The `none`
/// baseline is run first, and added if absent.
pub fn bench_speed(
    config: &ExperimentConfig,
    strategies: &[PerturbationStrategy],
    steps: u64,
) -> Result<Vec<SpeedRow>> {
    if steps == 0 {
        return Err(Error::WindowTooShort);
    }
    let mut order = vec![PerturbationStrategy::none()];
    order.extend(strategies.iter().filter(|s| !s.is_none()).copied());
    let mut rows: Vec<SpeedRow> = Vec::with_capacity(order.len());
    for strategy in order {
        let mut cfg = config.clone();
        cfg.strategy = strategy;
        cfg.training.steps = steps + WARMUP_STEPS as u64;
        let (_, metrics) = train_model(&cfg, |_, _| Ok(()))?;
        let tps = throughput(&metrics)?;
        let base = rows.first().map_or(tps, |r| r.tokens_per_sec);
        info!("{}: {tps:.0} tokens/s", strategy.label());
        rows.push(SpeedRow {
            strategy: strategy.label(),
            position: strategy.position_label(),
            tokens_per_sec: tps,
            ratio_vs_baseline: tps / base,
        });
    }
    Ok(rows)
}

/// `bench-speed`: runs [`bench_speed`] and writes the speed table.
pub fn bench_speed_run(
    config: &ExperimentConfig,
    strategies: &[PerturbationStrategy],
    steps: u64,
    out: &Path,
) -> Result<Vec<SpeedRow>> {
    config.validate()?;
    let dir = OutputDir::create(out)?;
    let run = || -> Result<Vec<SpeedRow>> {
        dir.write_text(CONFIG_FILE, &config.to_toml()?)?;
        let rows = bench_speed(config, strategies, steps)?;
        let mut w = csv::Writer::from_writer(dir.create_file(SPEED_FILE)?);
        w.write_record([
            "strategy",
            "position",
            "tokens_per_sec",
            "ratio_vs_baseline",
        ])?;
        for r in &rows {
            w.write_record([
                r.strategy.clone(),
                r.position.clone(),
                format!("{:.1}", r.tokens_per_sec),
                format!("{:.2}", r.ratio_vs_baseline),
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir.join(SPEED_FILE), e))?;
        Ok(rows)
    };
    match run() {
        Ok(r) => dir.finish().map(|_| r),
        Err(e) => Err(dir.fail(e)),
    }
}
