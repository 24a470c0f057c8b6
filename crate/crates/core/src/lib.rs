//! Desk-scale sequence-to-sequence training lab for comparing training-time
//! perturbations: word replacement (uniform, similarity and scheduled
//! sampling), word dropout, and adversarial embedding offsets trained with a
//! virtual adversarial objective.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod perturb;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
