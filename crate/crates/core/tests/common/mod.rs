//! Helpers shared by integration test targets.
#![allow(dead_code)]

use std::cell::RefCell;

use weaver_core::cl::{Checkpoint, Trainer, TrainingObjective};
use weaver_core::data::TrainingData;
use weaver_core::model::{Context, Example, FreezeMask, ModelConfig, ParameterSet};
use weaver_core::Result;

pub fn tiny_config() -> ModelConfig {
    ModelConfig { vocab_size: 10, embed_dim: 4, num_layers: 1, hidden_dim: 4, num_labels: 3, context: Context::Full, seed: 0 }
}

/// Corpus `index` holds `index + 1` placeholder sentences so the stub trainer
/// can tell corpora apart; its averaging weight is `size`.
pub struct StubCorpus {
    pub name: String,
    pub size: usize,
    pub examples: Vec<Example>,
}

impl StubCorpus {
    pub fn new(index: usize, size: usize) -> Self {
        let examples = vec![Example { tokens: vec![2], labels: vec![0] }; index + 1];
        Self { name: format!("c{index}"), size, examples }
    }
}

impl TrainingData for StubCorpus {
    fn name(&self) -> &str {
        &self.name
    }
    fn declared_size(&self) -> usize {
        self.size
    }
    fn examples(&self) -> &[Example] {
        &self.examples
    }
}

/// "Training" on corpus `i` sets every parameter to `values[i]` and records
/// `(stage, i)`.
pub struct StubTrainer {
    pub values: Vec<f64>,
    pub calls: RefCell<Vec<(usize, usize)>>,
}

impl StubTrainer {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, calls: RefCell::new(Vec::new()) }
    }
}

impl Trainer for StubTrainer {
    fn epochs(&self) -> usize {
        1
    }

    fn train(
        &self,
        _config: &ModelConfig,
        params: &ParameterSet,
        examples: &[Example],
        _objective: &TrainingObjective,
        _mask: &FreezeMask,
        _epochs: usize,
        stage: usize,
    ) -> Result<ParameterSet> {
        let corpus = examples.len() - 1;
        self.calls.borrow_mut().push((stage, corpus));
        Ok(params.filled_like(self.values[corpus]))
    }
}

pub fn stub_corpora(sizes: &[usize]) -> Vec<StubCorpus> {
    sizes.iter().enumerate().map(|(i, &n)| StubCorpus::new(i, n)).collect()
}

pub fn stub_base() -> Checkpoint {
    Checkpoint::base(&tiny_config()).unwrap()
}

/// Σ nᵢvᵢ / Σ nᵢ.
pub fn closed_form(sizes: &[usize], values: &[f64]) -> f64 {
    let total: usize = sizes.iter().sum();
    sizes.iter().zip(values).map(|(&n, v)| n as f64 * v).sum::<f64>() / total as f64
}
