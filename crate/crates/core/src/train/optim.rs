use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::eps")]
    pub eps: f64,
    /// Linear warmup length in steps.
    #[serde(default = "defaults::warmup")]
    pub warmup: u64,
    #[serde(default = "defaults::clip_norm")]
    pub clip_norm: f64,
}

mod defaults {
    pub fn lr() -> f64 {
        5e-4
    }
    pub fn beta1() -> f64 {
        0.9
    }
    pub fn beta2() -> f64 {
        0.999
    }
    pub fn eps() -> f64 {
        1e-8
    }
    pub fn warmup() -> u64 {
        100
    }
    pub fn clip_norm() -> f64 {
        1.0
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: defaults::lr(),
            beta1: defaults::beta1(),
            beta2: defaults::beta2(),
            eps: defaults::eps(),
            warmup: defaults::warmup(),
            clip_norm: defaults::clip_norm(),
        }
    }
}

impl OptimizerConfig {
    /// Learning rate for the step following `completed` steps.
    pub fn learning_rate(&self, completed: u64) -> f64 {
        if self.warmup == 0 {
            return self.lr;
        }
        self.lr * ((completed + 1) as f64 / self.warmup as f64).min(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.clip_norm > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "optimizer needs lr, eps and clip_norm > 0 and betas in [0, 1)".into(),
            ))
        }
    }
}

/// Adam moment estimates per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
    t: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: BTreeMap<String, Tensor> = params
            .iter()
            .map(|(n, t)| (n.to_string(), Tensor::zeros(t.shape())))
            .collect();
        OptimizerState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut BTreeMap<String, Tensor>, max_norm: f64) -> f64 {
    let norm = grads
        .values()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.values_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

/// One bias-corrected Adam update with learning rate `lr`. Missing
/// gradients count as zero.
pub fn adam_update(
    params: &mut ModelParams,
    grads: &BTreeMap<String, Tensor>,
    state: &mut OptimizerState,
    config: &OptimizerConfig,
    lr: f64,
) -> Result<()> {
    for (name, g) in grads {
        let p = params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Config(format!("gradient for unknown parameter `{name}`")))?;
        if g.shape() != p.shape() {
            return Err(Error::shape(
                "adam_update",
                format!("gradient of `{name}` has shape {:?}", g.shape()),
            ));
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (name, p) in params.iter_mut() {
        let g = grads.get(name).map(Tensor::data);
        let m = state
            .m
            .get_mut(name)
            .expect("moments track every parameter");
        let v = state
            .v
            .get_mut(name)
            .expect("moments track every parameter");
        for (i, ((p, m), v)) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .enumerate()
        {
            let g = g.map_or(0.0, |g| g[i]);
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + config.eps);
        }
    }
    Ok(())
}
