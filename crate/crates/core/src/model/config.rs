use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest sequence the tagger accepts; longer inputs are truncated.
pub const MAX_SEQ_LEN: usize = 64;

/// Which positions a token may attend to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Context {
    /// Every position attends to every other position.
    #[default]
    Full,
    /// Positions attend to neighbours at most this many steps away.
    Window(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_labels: usize,
    #[serde(default)]
    pub context: Context,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("num_layers", self.num_layers),
            ("hidden_dim", self.hidden_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.num_labels < 3 {
            return Err(Error::Config(format!(
                "num_labels must be at least 3 (O, B-X, I-X), got {}",
                self.num_labels
            )));
        }
        Ok(())
    }

    /// Layer ordinal of the label head (embedding is 0, encoder layers 1..=L).
    pub fn head_layer(&self) -> usize {
        self.num_layers + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            epochs: 3,
            batch_size: 16,
            learning_rate: 3e-5,
            optimizer: Optimizer::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: None,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(c) = self.grad_clip {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::Config(format!("grad_clip must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// Set of layer ordinals excluded from gradient updates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezeMask {
    pub frozen_layers: BTreeSet<usize>,
}

impl FreezeMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(frozen_layers: impl IntoIterator<Item = usize>, config: &ModelConfig) -> Result<Self> {
        let frozen_layers: BTreeSet<usize> = frozen_layers.into_iter().collect();
        if let Some(&bad) = frozen_layers.iter().find(|&&l| l > config.head_layer()) {
            return Err(Error::Config(format!(
                "layer ordinal {bad} out of range 0..={}",
                config.head_layer()
            )));
        }
        Ok(Self { frozen_layers })
    }

    /// Freeze the first `count` layer ordinals: the embedding and then encoder
    /// layers in order. `count` may not exceed the number of encoder layers,
    /// so at least the last encoder layer and the head stay trainable.
    pub fn prefix(count: usize, config: &ModelConfig) -> Result<Self> {
        if count > config.num_layers {
            return Err(Error::Config(format!(
                "cannot freeze {count} layers of a model with {} encoder layers",
                config.num_layers
            )));
        }
        Self::new(0..count, config)
    }

    /// Every layer, including embedding and head.
    pub fn all(config: &ModelConfig) -> Self {
        Self { frozen_layers: (0..=config.head_layer()).collect() }
    }

    pub fn is_frozen(&self, layer: usize) -> bool {
        self.frozen_layers.contains(&layer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            vocab_size: 10,
            embed_dim: 4,
            num_layers: 4,
            hidden_dim: 8,
            num_labels: 3,
            context: Context::Full,
            seed: 1,
        }
    }

    #[test]
    fn default_hyperparams() {
        let h = Hyperparams::default();
        assert_eq!(h.epochs, 3);
        assert_eq!(h.batch_size, 16);
        assert_eq!(h.learning_rate, 3e-5);
        assert_eq!(h.optimizer, Optimizer::Adam);
    }

    #[test]
    fn rejects_too_few_labels() {
        let mut c = cfg();
        c.num_labels = 2;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.num_labels = 3;
        c.embed_dim = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn prefix_mask_bounds() {
        let c = cfg();
        let m = FreezeMask::prefix(3, &c).unwrap();
        assert_eq!(m.frozen_layers.iter().copied().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(FreezeMask::prefix(0, &c).unwrap().frozen_layers.is_empty());
        assert!(FreezeMask::prefix(4, &c).is_ok());
        assert!(FreezeMask::prefix(c.num_layers + 2, &c).is_err());
        assert!(FreezeMask::new([6], &c).is_err());
    }

    #[test]
    fn window_context_roundtrips_through_json() {
        let mut c = cfg();
        c.context = Context::Window(3);
        let s = serde_json::to_string(&c).unwrap();
        let back: ModelConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
