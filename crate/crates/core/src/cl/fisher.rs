use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::objective::TrainingObjective;
use crate::error::{Error, Result};
use crate::model::{loss_and_grad, Example, ModelConfig, ParameterSet};

/// Empirical diagonal Fisher information: the mean over sampled sentences of
/// the squared gradient of the sentence log-likelihood of its gold labels.
///
/// `sample_count` of `None`, or at least the corpus size, uses every sentence.
pub fn fisher_diag(
    config: &ModelConfig,
    params: &ParameterSet,
    examples: &[Example],
    sample_count: Option<usize>,
    seed: u64,
) -> Result<ParameterSet> {
    if examples.is_empty() {
        return Err(Error::Argument("Fisher estimate needs a non-empty corpus".into()));
    }
    let indices: Vec<usize> = match sample_count {
        Some(0) => return Err(Error::Argument("sample_count must be positive".into())),
        Some(k) if k < examples.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, examples.len(), k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..examples.len()).collect(),
    };
    let plain = TrainingObjective::plain();
    let mut fisher = params.zeros_like();
    let scale = 1.0 / indices.len() as f64;
    for &i in &indices {
        let ex = &examples[i];
        // loss_and_grad averages over tokens; undo that to get d(Σ log p).
        let (_, grad) = loss_and_grad(config, params, std::slice::from_ref(ex), &plain)?;
        let n = ex.tokens.len() as f64;
        for (f, g) in fisher.tensors_mut().iter_mut().zip(grad.tensors()) {
            for (fv, gv) in f.data.iter_mut().zip(&g.data) {
                let s = gv * n;
                *fv += s * s * scale;
            }
        }
    }
    Ok(fisher)
}
