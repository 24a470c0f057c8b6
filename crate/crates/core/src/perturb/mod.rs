//! Training-time perturbations: token replacement driven by an inverse
//! sigmoid keep schedule, word dropout masks, and gradient-normalized
//! adversarial embedding offsets. The three components compose freely.

mod apply;
mod sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Side;

pub use apply::{apply_strategy, AdversarialPass, PerturbedBatch, Perturber};
pub use sample::{
    adversarial_offsets, replace_tokens, word_dropout_mask, ReplacementDistribution,
    SimilarityTable,
};

/// Inverse sigmoid decay of the keep probability `α_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySchedule {
    #[serde(default = "defaults::q")]
    pub q: f64,
    #[serde(default = "defaults::k")]
    pub k: f64,
}

impl Default for DecaySchedule {
    fn default() -> Self {
        DecaySchedule {
            q: defaults::q(),
            k: defaults::k(),
        }
    }
}

/// `α_t = max(q, k / (k + exp(t / k)))`.
pub fn decay_alpha(schedule: &DecaySchedule, t: u64) -> f64 {
    let DecaySchedule { q, k } = *schedule;
    let e = (t as f64 / k).exp();
    if !e.is_finite() {
        return q;
    }
    q.max(k / (k + e))
}

mod defaults {
    pub fn q() -> f64 {
        0.9
    }
    pub fn k() -> f64 {
        1000.0
    }
    pub fn beta() -> f64 {
        0.9
    }
    pub fn epsilon() -> f64 {
        1.0
    }
    pub fn lambda() -> f64 {
        1.0
    }
}

/// Which side(s) of the encoder-decoder a component acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Enc,
    Dec,
    Both,
}

impl Position {
    pub fn covers(self, side: Side) -> bool {
        matches!(
            (self, side),
            (Position::Both, _) | (Position::Enc, Side::Src) | (Position::Dec, Side::Tgt)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Position::Enc => "enc",
            Position::Dec => "dec",
            Position::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Position> {
        match s {
            "enc" => Some(Position::Enc),
            "dec" => Some(Position::Dec),
            "both" => Some(Position::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReplacementKind {
    #[serde(rename = "uni")]
    Uniform,
    #[serde(rename = "sim")]
    Similarity,
    #[serde(rename = "ss")]
    Scheduled,
}

impl ReplacementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReplacementKind::Uniform => "uni",
            ReplacementKind::Similarity => "sim",
            ReplacementKind::Scheduled => "ss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Replacement {
    pub kind: ReplacementKind,
    pub position: Position,
    #[serde(default = "defaults::q")]
    pub q: f64,
    #[serde(default = "defaults::k")]
    pub k: f64,
}

impl Replacement {
    pub fn schedule(&self) -> DecaySchedule {
        DecaySchedule {
            q: self.q,
            k: self.k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordDropout {
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    pub position: Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adversarial {
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    pub position: Position,
}

/// A combination of perturbation components; all absent is the baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationStrategy {
    pub replacement: Option<Replacement>,
    pub word_dropout: Option<WordDropout>,
    pub adversarial: Option<Adversarial>,
}

impl PerturbationStrategy {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_none(&self) -> bool {
        self.replacement.is_none() && self.word_dropout.is_none() && self.adversarial.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = &self.replacement {
            if r.kind == ReplacementKind::Scheduled && r.position != Position::Dec {
                return Err(Error::ScheduledOnEncoder);
            }
            if !(0.0..=1.0).contains(&r.q) || !(r.k > 0.0 && r.k.is_finite()) {
                return Err(Error::Config(
                    "replacement needs q in [0, 1] and a finite k > 0".into(),
                ));
            }
        }
        if let Some(w) = &self.word_dropout {
            if !(0.0..=1.0).contains(&w.beta) {
                return Err(Error::Config(format!(
                    "word_dropout.beta {} is outside [0, 1]",
                    w.beta
                )));
            }
        }
        if let Some(a) = &self.adversarial {
            if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
                return Err(Error::Config(format!(
                    "adversarial.epsilon {} must be positive",
                    a.epsilon
                )));
            }
            if !(a.lambda >= 0.0 && a.lambda.is_finite()) {
                return Err(Error::Config(format!(
                    "adversarial.lambda {} must be non-negative",
                    a.lambda
                )));
            }
        }
        Ok(())
    }

    /// Builds a single-component strategy from a short name such as
    /// `rep_sim`, `wdrop` or `adv`, optionally suffixed with `:enc`, `:dec`
    /// or `:both`. Hyperparameters take their defaults.
    pub fn from_name(text: &str) -> Result<Self> {
        let (name, pos) = match text.split_once(':') {
            Some((n, p)) => {
                let p = Position::parse(p)
                    .ok_or_else(|| Error::Config(format!("unknown position `{p}` in `{text}`")))?;
                (n, Some(p))
            }
            None => (text, None),
        };
        let rep = |kind, default| Replacement {
            kind,
            position: pos.unwrap_or(default),
            q: defaults::q(),
            k: defaults::k(),
        };
        let mut s = PerturbationStrategy::none();
        match name {
            "none" => {
                if pos.is_some() {
                    return Err(Error::Config(
                        "the `none` strategy takes no position".into(),
                    ));
                }
            }
            "rep_uni" => s.replacement = Some(rep(ReplacementKind::Uniform, Position::Dec)),
            "rep_sim" => s.replacement = Some(rep(ReplacementKind::Similarity, Position::Dec)),
            "rep_ss" => s.replacement = Some(rep(ReplacementKind::Scheduled, Position::Dec)),
            "wdrop" => {
                s.word_dropout = Some(WordDropout {
                    beta: defaults::beta(),
                    position: pos.unwrap_or(Position::Enc),
                })
            }
            "adv" => {
                s.adversarial = Some(Adversarial {
                    epsilon: defaults::epsilon(),
                    lambda: defaults::lambda(),
                    position: pos.unwrap_or(Position::Both),
                })
            }
            other => return Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
        s.validate()?;
        Ok(s)
    }

    /// Short label, e.g. `none`, `rep_ss` or `wdrop+adv`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(r) = &self.replacement {
            parts.push(format!("rep_{}", r.kind.as_str()));
        }
        if self.word_dropout.is_some() {
            parts.push("wdrop".to_string());
        }
        if self.adversarial.is_some() {
            parts.push("adv".to_string());
        }
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join("+")
        }
    }

    /// Positions of the components in label order, e.g. `dec` or `enc+both`.
    pub fn position_label(&self) -> String {
        let parts: Vec<&str> = [
            self.replacement.map(|r| r.position),
            self.word_dropout.map(|w| w.position),
            self.adversarial.map(|a| a.position),
        ]
        .into_iter()
        .flatten()
        .map(Position::as_str)
        .collect();
        if parts.is_empty() {
            "-".to_string()
        } else {
            parts.join("+")
        }
    }
}
