use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{generate_task, CorruptionMode, Dataset, TaskKind};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_RATIOS;
use crate::model::ModelConfig;
use crate::perturb::PerturbationStrategy;
use crate::rng::mix64;
use crate::train::OptimizerConfig;

/// Everything that defines a run. Parsed from TOML; unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub strategy: PerturbationStrategy,
    pub training: TrainingConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Total vocabulary size including the three reserved ids.
    #[serde(default = "defaults::vocab_size")]
    pub vocab_size: usize,
    /// Inclusive source length range.
    #[serde(default = "defaults::len_range")]
    pub len_range: (usize, usize),
    #[serde(default = "defaults::n_train")]
    pub n_train: usize,
    #[serde(default = "defaults::n_eval")]
    pub n_valid: usize,
    #[serde(default = "defaults::n_eval")]
    pub n_test: usize,
}

/// Model hyperparameters; vocabulary sizes come from the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "crate::model::defaults::d_model")]
    pub d_model: usize,
    #[serde(default = "crate::model::defaults::n_heads")]
    pub n_heads: usize,
    #[serde(default = "crate::model::defaults::n_layers")]
    pub n_layers_enc: usize,
    #[serde(default = "crate::model::defaults::n_layers")]
    pub n_layers_dec: usize,
    #[serde(default = "crate::model::defaults::d_ffn")]
    pub d_ffn: usize,
    #[serde(default = "crate::model::defaults::max_len")]
    pub max_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::new(4, 4, crate::model::defaults::max_len());
        ModelSection {
            d_model: m.d_model,
            n_heads: m.n_heads,
            n_layers_enc: m.n_layers_enc,
            n_layers_dec: m.n_layers_dec,
            d_ffn: m.d_ffn,
            max_len: m.max_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub seed: u64,
    #[serde(default = "defaults::steps")]
    pub steps: u64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::adam_eps")]
    pub adam_eps: f64,
    #[serde(default = "defaults::warmup")]
    pub warmup: u64,
    #[serde(default = "defaults::clip_norm")]
    pub clip_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "defaults::ratios")]
    pub ratios: Vec<f64>,
    /// Validation interval in steps; 0 evaluates only at the end.
    #[serde(default)]
    pub eval_every: u64,
    #[serde(default)]
    pub corruption: CorruptionMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ratios: defaults::ratios(),
            eval_every: 0,
            corruption: CorruptionMode::default(),
        }
    }
}

mod defaults {
    use crate::train::OptimizerConfig;

    pub fn vocab_size() -> usize {
        32
    }
    pub fn len_range() -> (usize, usize) {
        (4, 10)
    }
    pub fn n_train() -> usize {
        10_000
    }
    pub fn n_eval() -> usize {
        500
    }
    pub fn steps() -> u64 {
        3000
    }
    pub fn batch_size() -> usize {
        32
    }
    pub fn lr() -> f64 {
        OptimizerConfig::default().lr
    }
    pub fn beta1() -> f64 {
        OptimizerConfig::default().beta1
    }
    pub fn beta2() -> f64 {
        OptimizerConfig::default().beta2
    }
    pub fn adam_eps() -> f64 {
        OptimizerConfig::default().eps
    }
    pub fn warmup() -> u64 {
        OptimizerConfig::default().warmup
    }
    pub fn clip_norm() -> f64 {
        OptimizerConfig::default().clip_norm
    }
    pub fn ratios() -> Vec<f64> {
        super::DEFAULT_RATIOS.to_vec()
    }
}

/// Which generated split to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl ExperimentConfig {
    /// Parses and validates TOML text. Errors name the offending key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().message().trim().to_string();
            if path == "." {
                Error::Config(inner)
            } else {
                Error::Config(format!("{path}: {inner}"))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML with every default written out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.task;
        let (lo, hi) = t.len_range;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!(
                "task.len_range ({lo}, {hi}) is not a valid range"
            )));
        }
        if hi + 2 > self.model.max_len {
            return Err(Error::Config(format!(
                "task.len_range upper bound {hi} must be at most model.max_len - 2 = {}",
                self.model.max_len.saturating_sub(2)
            )));
        }
        if t.n_train == 0 || t.n_test == 0 {
            return Err(Error::Config(
                "task.n_train and task.n_test must be positive".into(),
            ));
        }
        self.model_config().validate()?;
        self.strategy
            .validate()
            .map_err(|e| Error::Config(format!("strategy: {e}")))?;
        self.optimizer().validate()?;
        if self.training.steps == 0 || self.training.batch_size == 0 {
            return Err(Error::Config(
                "training.steps and training.batch_size must be positive".into(),
            ));
        }
        if let Some(r) = self.eval.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!(
                "eval.ratios entry {r} is outside [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            vocab_size_src: self.task.vocab_size,
            vocab_size_tgt: self.task.vocab_size,
            d_model: m.d_model,
            n_heads: m.n_heads,
            n_layers_enc: m.n_layers_enc,
            n_layers_dec: m.n_layers_dec,
            d_ffn: m.d_ffn,
            max_len: m.max_len,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        let t = &self.training;
        OptimizerConfig {
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.adam_eps,
            warmup: t.warmup,
            clip_norm: t.clip_norm,
        }
    }

    /// Regenerates one split; each split has its own seed derived from
    /// `training.seed`.
    pub fn dataset(&self, split: Split) -> Result<Dataset> {
        let t = &self.task;
        let (n, tag) = match split {
            Split::Train => (t.n_train, 1),
            Split::Valid => (t.n_valid, 2),
            Split::Test => (t.n_test, 3),
        };
        let seed = mix64(self.training.seed ^ mix64(tag));
        generate_task(t.kind, n, t.vocab_size, t.len_range, seed)
    }
}
