//! Experiment runner: TOML configuration, run directories with CSV
//! artifacts, speed benchmarks and cross-run reports.

mod config;
mod output;
mod report;
mod run;

pub use config::{EvalConfig, ExperimentConfig, ModelSection, Split, TaskConfig, TrainingConfig};
pub use output::{OutputDir, INCOMPLETE_MARKER};
pub use report::{aggregate, read_result, report_run, ReportRow, Spread};
pub use run::{
    bench_speed, bench_speed_run, evaluate_run, load_run, robustness_run, train_model, train_run,
    RunResult, SpeedRow, TrainOptions, CHECKPOINT_FILE, CONFIG_FILE, EVAL_FILE, METRICS_FILE,
    RESULT_FILE, ROBUSTNESS_FILE, SPEED_FILE, TIMING_FILE, VALID_FILE,
};

#[cfg(test)]
mod tests;
