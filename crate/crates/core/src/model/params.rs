use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, MAX_SEQ_LEN};
use crate::error::{Error, Result};

/// Tensors per encoder layer, in canonical order.
pub(crate) const LAYER_TENSORS: [&str; 13] = [
    "attn.wq", "attn.wk", "attn.wv", "attn.wo", "attn.bo", "ln1.gain", "ln1.bias", "ffn.w1",
    "ffn.b1", "ffn.w2", "ffn.b2", "ln2.gain", "ln2.bias",
];

// Offsets within one layer's block.
pub(crate) const WQ: usize = 0;
pub(crate) const WK: usize = 1;
pub(crate) const WV: usize = 2;
pub(crate) const WO: usize = 3;
pub(crate) const BO: usize = 4;
pub(crate) const LN1_G: usize = 5;
pub(crate) const LN1_B: usize = 6;
pub(crate) const W1: usize = 7;
pub(crate) const B1: usize = 8;
pub(crate) const W2: usize = 9;
pub(crate) const B2: usize = 10;
pub(crate) const LN2_G: usize = 11;
pub(crate) const LN2_B: usize = 12;

pub(crate) const EMBED: usize = 0;
pub(crate) const POS: usize = 1;

/// Index of the first tensor of encoder layer `layer` (0-based).
pub(crate) fn layer_base(layer: usize) -> usize {
    2 + layer * LAYER_TENSORS.len()
}

pub(crate) fn head_w(num_layers: usize) -> usize {
    layer_base(num_layers)
}

pub(crate) fn head_b(num_layers: usize) -> usize {
    layer_base(num_layers) + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Glorot { fan_in: usize, fan_out: usize },
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    /// Layer ordinal: embedding 0, encoder layers 1..=L, head L+1.
    pub layer: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Named, ordered tensors of one tagger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    tensors: Vec<Tensor>,
}

fn layout(config: &ModelConfig) -> Vec<(String, Vec<usize>, usize, Init)> {
    let d = config.embed_dim;
    let h = config.hidden_dim;
    let c = config.num_labels;
    let glorot = |fan_in, fan_out| Init::Glorot { fan_in, fan_out };
    let mut out = vec![
        ("embed".to_string(), vec![config.vocab_size, d], 0, glorot(config.vocab_size, d)),
        ("embed.pos".to_string(), vec![MAX_SEQ_LEN, d], 0, glorot(MAX_SEQ_LEN, d)),
    ];
    for l in 0..config.num_layers {
        let ordinal = l + 1;
        for (k, suffix) in LAYER_TENSORS.iter().enumerate() {
            let (shape, init) = match k {
                WQ | WK | WV | WO => (vec![d, d], glorot(d, d)),
                BO | LN1_B | B2 | LN2_B => (vec![d], Init::Zeros),
                LN1_G | LN2_G => (vec![d], Init::Ones),
                W1 => (vec![d, h], glorot(d, h)),
                B1 => (vec![h], Init::Zeros),
                W2 => (vec![h, d], glorot(h, d)),
                _ => unreachable!(),
            };
            out.push((format!("layer.{ordinal}.{suffix}"), shape, ordinal, init));
        }
    }
    let head = config.head_layer();
    out.push(("head.w".to_string(), vec![d, c], head, glorot(d, c)));
    out.push(("head.b".to_string(), vec![c], head, Init::Zeros));
    out
}

/// Draws a fresh parameter set. Weights are uniform in
/// ±sqrt(6 / (fan_in + fan_out)); biases are zero and layer-norm gains one.
pub fn init_params(config: &ModelConfig) -> Result<ParameterSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tensors = layout(config)
        .into_iter()
        .map(|(name, shape, layer, init)| {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::Glorot { fan_in, fan_out } => {
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
                }
            };
            Tensor { name, shape, layer, data }
        })
        .collect();
    Ok(ParameterSet { tensors })
}

impl ParameterSet {
    /// Builds a set from explicit tensors, checking shape/data agreement.
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        for t in &tensors {
            let n: usize = t.shape.iter().product();
            if n != t.data.len() {
                return Err(Error::Structure(format!(
                    "tensor {} has shape {:?} but {} values",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
        }
        Ok(Self { tensors })
    }

    /// Same layout as `self`, every entry zero.
    pub fn zeros_like(&self) -> Self {
        self.map(|_| 0.0)
    }

    /// Same layout as `self`, every entry `value`.
    pub fn filled_like(&self, value: f64) -> Self {
        self.map(|_| value)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|t| Tensor { data: t.data.iter().map(|&x| f(x)).collect(), ..t.clone() })
            .collect();
        Self { tensors }
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub(crate) fn data(&self, index: usize) -> &[f64] {
        &self.tensors[index].data
    }

    pub(crate) fn data_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.tensors[index].data
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Flat view over all entries in canonical order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.tensors.iter().flat_map(|t| t.data.iter().copied())
    }

    /// Errors unless `other` has the same tensor names and shapes in the same order.
    pub fn check_same_layout(&self, other: &ParameterSet) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::Structure(format!(
                "parameter sets have {} and {} tensors",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            if a.name != b.name || a.shape != b.shape {
                return Err(Error::Structure(format!(
                    "tensor {}{:?} does not match {}{:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
        }
        Ok(())
    }

    /// Checks that the layout is exactly the one `config` produces.
    pub fn check_config(&self, config: &ModelConfig) -> Result<()> {
        let expected = layout(config);
        if expected.len() != self.tensors.len() {
            return Err(Error::Structure(format!(
                "expected {} tensors for this model config, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape, layer, _), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || *layer != t.layer {
                return Err(Error::Structure(format!("unexpected tensor {} {:?}", t.name, t.shape)));
            }
        }
        Ok(())
    }

    /// `self += scale * other`, element-wise.
    pub fn add_scaled(&mut self, other: &ParameterSet, scale: f64) -> Result<()> {
        self.check_same_layout(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &ParameterSet) -> Result<f64> {
        self.check_same_layout(other)?;
        Ok(self
            .values()
            .zip(other.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
