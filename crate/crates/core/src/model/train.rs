use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{FreezeMask, Hyperparams, ModelConfig, Optimizer};
use super::network::{loss_and_grad, Example};
use super::params::ParameterSet;
use crate::cl::TrainingObjective;
use crate::error::{Error, Result};

struct Adam {
    m: ParameterSet,
    v: ParameterSet,
    step: i32,
}

/// Mixes the stage ordinal into the shuffling seed so successive stages of a
/// run do not replay identical batch orders.
fn stage_seed(seed: u64, stage: usize) -> u64 {
    seed ^ (stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `epochs` passes of mini-batch optimisation over `examples`.
///
/// Tensors whose layer is frozen are never touched, so they come back
/// bit-identical.
#[allow(clippy::too_many_arguments)]
pub fn train_epochs(
    config: &ModelConfig,
    params: &ParameterSet,
    examples: &[Example],
    hyper: &Hyperparams,
    objective: &TrainingObjective,
    mask: &FreezeMask,
    epochs: usize,
    stage: usize,
) -> Result<ParameterSet> {
    hyper.validate()?;
    let mut params = params.clone();
    if epochs == 0 {
        return Ok(params);
    }
    if examples.is_empty() {
        return Err(Error::Input("cannot train on an empty corpus".into()));
    }
    let trainable: Vec<bool> = params.tensors().iter().map(|t| !mask.is_frozen(t.layer)).collect();
    if !trainable.iter().any(|&t| t) {
        return Ok(params);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(hyper.seed, stage));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut adam = Adam { m: params.zeros_like(), v: params.zeros_like(), step: 0 };
    let mut batch = Vec::with_capacity(hyper.batch_size);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            let (_, mut grad) = loss_and_grad(config, &params, &batch, objective)?;
            for (g, &tr) in grad.tensors_mut().iter_mut().zip(&trainable) {
                if !tr {
                    g.data.iter_mut().for_each(|x| *x = 0.0);
                }
            }
            if let Some(max_norm) = hyper.grad_clip {
                let norm = grad.values().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    let s = max_norm / norm;
                    grad = grad.map(|g| g * s);
                }
            }
            match hyper.optimizer {
                Optimizer::Sgd => {
                    for ((p, g), &tr) in params.tensors_mut().iter_mut().zip(grad.tensors()).zip(&trainable) {
                        if tr {
                            for (pv, gv) in p.data.iter_mut().zip(&g.data) {
                                *pv -= hyper.learning_rate * gv;
                            }
                        }
                    }
                }
                Optimizer::Adam => {
                    adam.step += 1;
                    let b1 = hyper.adam_beta1;
                    let b2 = hyper.adam_beta2;
                    let c1 = 1.0 - b1.powi(adam.step);
                    let c2 = 1.0 - b2.powi(adam.step);
                    let lr = hyper.learning_rate;
                    for (i, &tr) in trainable.iter().enumerate() {
                        if !tr {
                            continue;
                        }
                        let g = &grad.tensors()[i].data;
                        let m = &mut adam.m.tensors_mut()[i].data;
                        let v = &mut adam.v.tensors_mut()[i].data;
                        let p = &mut params.tensors_mut()[i].data;
                        for j in 0..g.len() {
                            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                            let mhat = m[j] / c1;
                            let vhat = v[j] / c2;
                            p[j] -= lr * mhat / (vhat.sqrt() + hyper.adam_eps);
                        }
                    }
                }
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::Input("training diverged to non-finite parameters".into()));
    }
    Ok(params)
}

/// [`train_epochs`] for `hyper.epochs` passes, stage 0.
pub fn train(
    config: &ModelConfig,
    params: &ParameterSet,
    examples: &[Example],
    hyper: &Hyperparams,
    objective: &TrainingObjective,
    mask: &FreezeMask,
) -> Result<ParameterSet> {
    train_epochs(config, params, examples, hyper, objective, mask, hyper.epochs, 0)
}
