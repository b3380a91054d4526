use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::SuiteConfig;
use crate::error::{Error, Result};
use crate::model::{Hyperparams, ModelConfig};

/// Number of random orders used when a config lists none.
pub const DEFAULT_ORDERS: usize = 4;
/// Number of seeds used when a config lists none.
pub const DEFAULT_SEEDS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Finetune,
    Ewc,
    Weaver,
    Replay,
    Mtl,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Finetune, Strategy::Ewc, Strategy::Weaver, Strategy::Replay, Strategy::Mtl];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Finetune => "finetune",
            Strategy::Ewc => "ewc",
            Strategy::Weaver => "weaver",
            Strategy::Replay => "replay",
            Strategy::Mtl => "mtl",
        }
    }

    /// Whether the strategy trains corpus by corpus and so has a full result
    /// matrix.
    pub fn is_sequential(self) -> bool {
        self != Strategy::Mtl
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

fn all_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}
fn default_seeds() -> Vec<u64> {
    (0..DEFAULT_SEEDS).collect()
}
fn default_lambda() -> f64 {
    100.0
}
fn default_replay() -> f64 {
    0.10
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}
fn default_task_label() -> String {
    "NER".into()
}

/// Everything needed to reproduce an experiment.
///
/// `model.vocab_size` is an upper bound; the actual size comes from the
/// vocabulary built for each order. `model.seed` and `hyper.seed` are replaced
/// by the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub suite: SuiteConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub hyper: Hyperparams,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    /// Corpus-index permutations. Empty means [`DEFAULT_ORDERS`] random ones.
    #[serde(default)]
    pub orders: Vec<Vec<usize>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub freeze_layers: Option<usize>,
    #[serde(default = "default_lambda")]
    pub ewc_lambda: f64,
    /// Sentences used per Fisher estimate; all when absent.
    #[serde(default)]
    pub fisher_samples: Option<usize>,
    #[serde(default = "default_replay")]
    pub replay_fraction: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_task_label")]
    pub task_label: String,
}

impl ExperimentConfig {
    /// Parses and validates; any problem is a configuration error.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        self.suite.validate()?;
        self.model.validate()?;
        self.hyper.validate()?;
        if self.model.vocab_size < 3 {
            return err(format!("model.vocab_size {} leaves no room for ordinary tokens", self.model.vocab_size));
        }
        if self.model.num_labels != 3 {
            return err(format!(
                "model.num_labels must be 3 (O, B-{0}, I-{0}) for a single-type suite, got {1}",
                self.suite.entity_type, self.model.num_labels
            ));
        }
        if self.strategies.is_empty() {
            return err("strategies must not be empty".into());
        }
        let distinct: BTreeSet<_> = self.strategies.iter().collect();
        if distinct.len() != self.strategies.len() {
            return err("strategies contain duplicates".into());
        }
        if self.seeds.is_empty() {
            return err("seeds must not be empty".into());
        }
        let k = self.suite.num_corpora;
        for (i, order) in self.orders.iter().enumerate() {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..k).collect::<Vec<_>>() {
                return err(format!("order {i} {order:?} is not a permutation of 0..{k}"));
            }
        }
        if let Some(f) = self.freeze_layers {
            if f > self.model.num_layers {
                return err(format!(
                    "freeze_layers {f} exceeds the {} encoder layers",
                    self.model.num_layers
                ));
            }
        }
        if !(self.ewc_lambda >= 0.0 && self.ewc_lambda.is_finite()) {
            return err(format!("ewc_lambda {} must be a non-negative number", self.ewc_lambda));
        }
        if !(self.replay_fraction > 0.0 && self.replay_fraction <= 1.0) {
            return err(format!("replay_fraction {} outside (0, 1]", self.replay_fraction));
        }
        Ok(())
    }

    /// The configured orders, or distinct random permutations drawn from the
    /// suite seed.
    pub fn resolved_orders(&self) -> Vec<Vec<usize>> {
        if !self.orders.is_empty() {
            return self.orders.clone();
        }
        let k = self.suite.num_corpora;
        let possible: usize = (1..=k).product::<usize>();
        let want = DEFAULT_ORDERS.min(possible);
        let mut rng = ChaCha8Rng::seed_from_u64(self.suite.seed ^ 0x6F72_6465_7273);
        let mut orders: Vec<Vec<usize>> = Vec::with_capacity(want);
        while orders.len() < want {
            let mut p: Vec<usize> = (0..k).collect();
            p.shuffle(&mut rng);
            if !orders.contains(&p) {
                orders.push(p);
            }
        }
        orders
    }

    /// The config with orders filled in, as recorded next to the results.
    pub fn resolved(&self) -> Self {
        Self { orders: self.resolved_orders(), ..self.clone() }
    }

    /// Hex SHA-256 of the resolved config's JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.resolved()).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Largest vocabulary excluding PAD and UNK.
    pub(crate) fn vocab_cap(&self) -> usize {
        self.model.vocab_size.saturating_sub(2)
    }
}
