//! Continual learning for sequence tagging.
//!
//! The centerpiece is [`cl::weaver_run`]: fine-tune the running model on each
//! new corpus, then merge old and new weights with coefficients proportional
//! to the amount of data each has seen. Baselines ([`cl::finetune_run`],
//! [`cl::ewc_run`], [`cl::replay_run`], [`cl::mtl_run`]), the evaluation
//! protocol ([`eval`], [`stats`]), embedding projections ([`viz`]) and an
//! experiment harness ([`experiment`]) sit around it.

pub mod cl;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod stats;
pub mod viz;

pub use error::{Error, Result};
