//! Sequential training strategies. Each returns one checkpoint per stage
//! (except MTL, which trains once on everything).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::average::weight_average;
use super::checkpoint::Checkpoint;
use super::fisher::fisher_diag;
use super::objective::TrainingObjective;
use crate::data::TrainingData;
use crate::error::{Error, Result};
use crate::model::{train_epochs, Example, FreezeMask, Hyperparams, ModelConfig, ParameterSet};

/// Produces updated parameters from training data.
pub trait Trainer {
    /// Default number of passes per stage.
    fn epochs(&self) -> usize;

    /// Trains for `epochs` passes; `stage` is the ordinal of the sequential
    /// stage being trained.
    #[allow(clippy::too_many_arguments)]
    fn train(
        &self,
        config: &ModelConfig,
        params: &ParameterSet,
        examples: &[Example],
        objective: &TrainingObjective,
        mask: &FreezeMask,
        epochs: usize,
        stage: usize,
    ) -> Result<ParameterSet>;
}

/// Mini-batch gradient training.
#[derive(Debug, Clone)]
pub struct GradientTrainer {
    pub hyper: Hyperparams,
}

impl GradientTrainer {
    pub fn new(hyper: Hyperparams) -> Self {
        Self { hyper }
    }
}

impl Trainer for GradientTrainer {
    fn epochs(&self) -> usize {
        self.hyper.epochs
    }

    fn train(
        &self,
        config: &ModelConfig,
        params: &ParameterSet,
        examples: &[Example],
        objective: &TrainingObjective,
        mask: &FreezeMask,
        epochs: usize,
        stage: usize,
    ) -> Result<ParameterSet> {
        train_epochs(config, params, examples, &self.hyper, objective, mask, epochs, stage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeaverOptions {
    /// Fine-tune a fresh copy of the base model at every stage instead of the
    /// running model, then merge.
    pub reinit_each_stage: bool,
    /// Whether the label head takes part in the merge. When false the head of
    /// the newly fine-tuned model is kept.
    pub average_head: bool,
}

impl Default for WeaverOptions {
    fn default() -> Self {
        Self { reinit_each_stage: false, average_head: true }
    }
}

fn check_run<D: TrainingData>(corpora: &[D], base: &Checkpoint) -> Result<()> {
    if corpora.is_empty() {
        return Err(Error::Argument("at least one corpus is required".into()));
    }
    if base.cumulative_examples != 0 || !base.history.is_empty() {
        return Err(Error::Argument("base checkpoint must be untrained (empty history)".into()));
    }
    base.params.check_config(&base.model_config)
}

/// Fine-tune the running model on each corpus, then merge it with the model
/// from before that stage, weighting each by the data it has seen.
pub fn weaver_run<D: TrainingData, T: Trainer>(
    corpora: &[D],
    base: &Checkpoint,
    trainer: &T,
    mask: &FreezeMask,
    options: &WeaverOptions,
) -> Result<Vec<Checkpoint>> {
    check_run(corpora, base)?;
    let config = &base.model_config;
    let plain = TrainingObjective::plain();
    let head_layer = config.head_layer();
    let mut stages: Vec<Checkpoint> = Vec::with_capacity(corpora.len());
    for (i, corpus) in corpora.iter().enumerate() {
        let curr_data = corpus.declared_size();
        let running = stages.last().unwrap_or(base);
        let start = if options.reinit_each_stage { &base.params } else { &running.params };
        let trained = trainer.train(config, start, corpus.examples(), &plain, mask, trainer.epochs(), i)?;
        let next = if i == 0 {
            running.advanced(trained, corpus.name(), curr_data)
        } else {
            let all_data = running.cumulative_examples + curr_data;
            let mut merged = weight_average(&running.params, &trained, all_data, curr_data)?;
            if !options.average_head {
                for (m, t) in merged.tensors_mut().iter_mut().zip(trained.tensors()) {
                    if m.layer == head_layer {
                        m.data.clone_from(&t.data);
                    }
                }
            }
            running.advanced(merged, corpus.name(), curr_data)
        };
        stages.push(next);
    }
    Ok(stages)
}

/// Plain sequential fine-tuning.
pub fn finetune_run<D: TrainingData, T: Trainer>(
    corpora: &[D],
    base: &Checkpoint,
    trainer: &T,
    mask: &FreezeMask,
) -> Result<Vec<Checkpoint>> {
    check_run(corpora, base)?;
    let plain = TrainingObjective::plain();
    let mut stages: Vec<Checkpoint> = Vec::with_capacity(corpora.len());
    for (i, corpus) in corpora.iter().enumerate() {
        let running = stages.last().unwrap_or(base);
        let trained =
            trainer.train(&base.model_config, &running.params, corpus.examples(), &plain, mask, trainer.epochs(), i)?;
        stages.push(running.advanced(trained, corpus.name(), corpus.declared_size()));
    }
    Ok(stages)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EwcOptions {
    pub lambda: f64,
    /// Sentences used for the Fisher estimate; `None` uses the whole corpus.
    pub fisher_samples: Option<usize>,
    pub seed: u64,
}

impl Default for EwcOptions {
    fn default() -> Self {
        Self { lambda: 100.0, fisher_samples: None, seed: 0 }
    }
}

/// Sequential fine-tuning with a quadratic pull toward the previous stage's
/// weights, weighted by that stage's diagonal Fisher information.
pub fn ewc_run<D: TrainingData, T: Trainer>(
    corpora: &[D],
    base: &Checkpoint,
    trainer: &T,
    mask: &FreezeMask,
    options: &EwcOptions,
) -> Result<Vec<Checkpoint>> {
    check_run(corpora, base)?;
    if options.lambda.is_nan() || options.lambda < 0.0 {
        return Err(Error::Argument(format!("EWC lambda must be non-negative, got {}", options.lambda)));
    }
    let config = &base.model_config;
    let mut objective = TrainingObjective::plain();
    let mut stages: Vec<Checkpoint> = Vec::with_capacity(corpora.len());
    for (i, corpus) in corpora.iter().enumerate() {
        let running = stages.last().unwrap_or(base);
        let examples = corpus.examples();
        let trained = trainer.train(config, &running.params, examples, &objective, mask, trainer.epochs(), i)?;
        if i + 1 < corpora.len() {
            let fisher = fisher_diag(config, &trained, examples, options.fisher_samples, options.seed ^ i as u64)?;
            objective = TrainingObjective::ewc(options.lambda, fisher, trained.clone())?;
        }
        stages.push(running.advanced(trained, corpus.name(), corpus.declared_size()));
    }
    Ok(stages)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayOptions {
    pub fraction: f64,
    pub seed: u64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self { fraction: 0.10, seed: 0 }
    }
}

/// Uniform sample of previously seen sentences, kept at a fixed fraction of
/// everything seen so far.
#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    pub sentences: Vec<Example>,
    pub fraction: f64,
    pub seen: usize,
}

impl ReplayBuffer {
    pub fn new(fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Argument(format!("replay fraction {fraction} outside (0, 1]")));
        }
        Ok(Self { sentences: Vec::new(), fraction, seen: 0 })
    }

    /// Target size after `seen` sentences, `⌈fraction · seen⌉`.
    pub fn target_size(&self, seen: usize) -> usize {
        let t = self.fraction * seen as f64;
        // guard against 0.1 * 100 = 10.000000000000002
        ((t - 1e-9).ceil().max(0.0) as usize).min(seen)
    }

    /// Folds a newly seen corpus into the buffer. The old buffer stands in
    /// for all earlier data, so the result is a uniform sample of everything
    /// seen without revisiting earlier corpora.
    pub fn update(&mut self, current: &[Example], rng: &mut ChaCha8Rng) {
        let seen = self.seen + current.len();
        let target = self.target_size(seen);
        let mut from_current = if seen == 0 {
            0
        } else {
            ((target as f64 * current.len() as f64 / seen as f64).round() as usize).min(current.len())
        };
        let from_old = (target - from_current.min(target)).min(self.sentences.len());
        from_current = (target - from_old).min(current.len());

        let mut old_idx = rand::seq::index::sample(rng, self.sentences.len(), from_old).into_vec();
        old_idx.sort_unstable();
        let mut cur_idx = rand::seq::index::sample(rng, current.len(), from_current).into_vec();
        cur_idx.sort_unstable();
        let mut next: Vec<Example> = old_idx.iter().map(|&i| self.sentences[i].clone()).collect();
        next.extend(cur_idx.iter().map(|&i| current[i].clone()));
        self.sentences = next;
        self.seen = seen;
    }
}

/// Sequential fine-tuning; after each stage's regular epochs, one extra
/// epoch over a replay buffer of earlier data.
pub fn replay_run<D: TrainingData, T: Trainer>(
    corpora: &[D],
    base: &Checkpoint,
    trainer: &T,
    mask: &FreezeMask,
    options: &ReplayOptions,
) -> Result<Vec<Checkpoint>> {
    check_run(corpora, base)?;
    let mut buffer = ReplayBuffer::new(options.fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let plain = TrainingObjective::plain();
    let config = &base.model_config;
    let mut stages: Vec<Checkpoint> = Vec::with_capacity(corpora.len());
    for (i, corpus) in corpora.iter().enumerate() {
        let running = stages.last().unwrap_or(base);
        let examples = corpus.examples();
        let mut params = trainer.train(config, &running.params, examples, &plain, mask, trainer.epochs(), i)?;
        if !buffer.sentences.is_empty() {
            params = trainer.train(config, &params, &buffer.sentences, &plain, mask, 1, i)?;
        }
        buffer.update(examples, &mut rng);
        stages.push(running.advanced(params, corpus.name(), corpus.declared_size()));
    }
    Ok(stages)
}

/// Joint training on the concatenation of all corpora.
pub fn mtl_run<D: TrainingData, T: Trainer>(
    corpora: &[D],
    base: &Checkpoint,
    trainer: &T,
    mask: &FreezeMask,
) -> Result<Checkpoint> {
    check_run(corpora, base)?;
    let all: Vec<Example> = corpora.iter().flat_map(|c| c.examples().iter().cloned()).collect();
    let params = trainer.train(
        &base.model_config,
        &base.params,
        &all,
        &TrainingObjective::plain(),
        mask,
        trainer.epochs(),
        0,
    )?;
    let mut ckpt = base.clone();
    ckpt.params = params;
    for c in corpora {
        ckpt = ckpt.advanced(ckpt.params.clone(), c.name(), c.declared_size());
    }
    Ok(ckpt)
}
