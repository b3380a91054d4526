//! Synthetic multi-corpus tagging suites with controlled lexical shift.
//!
//! Every corpus draws entity mentions from its own lexicon of multi-word
//! phrases. Lexicons are windows into a shared phrase pool, positioned so that
//! consecutive corpora share `⌊overlap · lexicon_size⌋` phrases. Non-entity
//! tokens come from a shared Zipf-distributed vocabulary plus a handful of
//! corpus-specific domain words.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, SizeMode, Sentence, Split};
use super::tags::Tag;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

fn default_entity_type() -> String {
    "DIS".into()
}
fn default_domain_vocab() -> usize {
    20
}
fn default_domain_rate() -> f64 {
    0.15
}
fn default_sentence_len() -> (usize, usize) {
    (8, 20)
}
fn default_mention_len() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub num_corpora: usize,
    /// Training sentences per corpus.
    pub sizes: Vec<usize>,
    pub shared_vocab_size: usize,
    /// Entity phrases per corpus.
    pub lexicon_size: usize,
    /// Fraction of lexicon shared between consecutive corpora.
    pub lexicon_overlap: f64,
    /// Target fraction of tokens inside entity spans.
    pub entity_density: f64,
    /// Test sentences as a fraction of training sentences.
    pub test_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub size_mode: SizeMode,
    #[serde(default = "default_entity_type")]
    pub entity_type: String,
    /// Corpus-specific non-entity words per corpus.
    #[serde(default = "default_domain_vocab")]
    pub domain_vocab_size: usize,
    /// Probability that a non-entity token is a domain word.
    #[serde(default = "default_domain_rate")]
    pub domain_word_rate: f64,
    /// Inclusive sentence-length range.
    #[serde(default = "default_sentence_len")]
    pub sentence_length: (usize, usize),
    #[serde(default = "default_mention_len")]
    pub max_mention_len: usize,
}

impl SuiteConfig {
    /// Three-corpus default used throughout the examples and tests.
    pub fn small(num_corpora: usize, sentences: usize, overlap: f64, seed: u64) -> Self {
        Self {
            num_corpora,
            sizes: vec![sentences; num_corpora],
            shared_vocab_size: 60,
            lexicon_size: 40,
            lexicon_overlap: overlap,
            entity_density: 0.2,
            test_fraction: 0.5,
            seed,
            size_mode: SizeMode::Sentences,
            entity_type: default_entity_type(),
            domain_vocab_size: default_domain_vocab(),
            domain_word_rate: default_domain_rate(),
            sentence_length: default_sentence_len(),
            max_mention_len: default_mention_len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.num_corpora == 0 {
            return err("num_corpora must be at least 1".into());
        }
        if self.sizes.len() != self.num_corpora {
            return err(format!("{} sizes given for {} corpora", self.sizes.len(), self.num_corpora));
        }
        if let Some(i) = self.sizes.iter().position(|&s| s == 0) {
            return err(format!("corpus {i} has size 0"));
        }
        if !(0.0..=1.0).contains(&self.lexicon_overlap) {
            return err(format!("lexicon_overlap {} outside [0, 1]", self.lexicon_overlap));
        }
        if !(self.entity_density > 0.0 && self.entity_density < 1.0) {
            return err(format!("entity_density {} outside (0, 1)", self.entity_density));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction.is_finite()) {
            return err(format!("test_fraction {} must be positive", self.test_fraction));
        }
        if self.shared_vocab_size == 0 || self.lexicon_size == 0 || self.max_mention_len == 0 {
            return err("shared_vocab_size, lexicon_size and max_mention_len must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.domain_word_rate) {
            return err(format!("domain_word_rate {} outside [0, 1]", self.domain_word_rate));
        }
        let (lo, hi) = self.sentence_length;
        if lo == 0 || lo > hi || hi > crate::model::MAX_SEQ_LEN {
            return err(format!("sentence_length ({lo}, {hi}) invalid"));
        }
        Ok(())
    }

    /// Phrases shared by consecutive lexicons.
    pub fn shared_phrases(&self) -> usize {
        (self.lexicon_overlap * self.lexicon_size as f64).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPair {
    pub train: Corpus,
    pub test: Corpus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub tasks: Vec<CorpusPair>,
    /// Every shared word and every entity word of the suite.
    pub master_lexicon: Vec<String>,
    /// Phrase-pool indices making up each corpus' lexicon.
    pub lexicons: Vec<Vec<usize>>,
    pub entity_type: String,
}

impl Suite {
    /// Vocabulary fixed before sequential training: the tokens of the first
    /// training corpus plus the master lexicon. Domain words of later corpora
    /// therefore map to UNK. `max_size` excludes the special tokens.
    pub fn vocabulary(&self, first: usize, max_size: usize) -> Vocabulary {
        let first = &self.tasks[first].train;
        Vocabulary::build(
            first
                .sentences()
                .iter()
                .flat_map(|s| s.tokens.iter().map(String::as_str))
                .chain(self.master_lexicon.iter().map(String::as_str)),
            max_size,
        )
    }
}

struct Generator<'a> {
    config: &'a SuiteConfig,
    pool: &'a [Vec<String>],
    shared: Vec<String>,
    zipf: WeightedIndex<f64>,
}

impl Generator<'_> {
    fn sentence(&self, rng: &mut ChaCha8Rng, lexicon: &[usize], domain: &[String], start_p: f64) -> Sentence {
        let (lo, hi) = self.config.sentence_length;
        let len = rng.random_range(lo..=hi);
        let mut tokens = Vec::with_capacity(len);
        let mut tags = Vec::with_capacity(len);
        let ty = &self.config.entity_type;
        while tokens.len() < len {
            if rng.random_bool(start_p) {
                let phrase = &self.pool[lexicon[rng.random_range(0..lexicon.len())]];
                if tokens.len() + phrase.len() <= len {
                    for (i, w) in phrase.iter().enumerate() {
                        tokens.push(w.clone());
                        tags.push(if i == 0 { Tag::B(ty.clone()) } else { Tag::I(ty.clone()) });
                    }
                    continue;
                }
            }
            let word = if !domain.is_empty() && rng.random_bool(self.config.domain_word_rate) {
                domain[rng.random_range(0..domain.len())].clone()
            } else {
                self.shared[self.zipf.sample(rng)].clone()
            };
            tokens.push(word);
            tags.push(Tag::O);
        }
        Sentence { tokens, tags }
    }
}

pub fn generate_suite(config: &SuiteConfig) -> Result<Suite> {
    config.validate()?;
    let k = config.num_corpora;
    let stride = config.lexicon_size - config.shared_phrases();
    let pool_len = config.lexicon_size + stride * (k - 1);

    let mut pool_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pool: Vec<Vec<String>> = (0..pool_len)
        .map(|j| {
            let len = pool_rng.random_range(1..=config.max_mention_len);
            (0..len).map(|w| format!("e{j}x{w}")).collect()
        })
        .collect();
    let shared: Vec<String> = (0..config.shared_vocab_size).map(|i| format!("w{i}")).collect();
    let zipf = WeightedIndex::new((0..config.shared_vocab_size).map(|i| 1.0 / (i + 1) as f64))
        .map_err(|e| Error::Config(e.to_string()))?;
    let lexicons: Vec<Vec<usize>> = (0..k).map(|c| (c * stride..c * stride + config.lexicon_size).collect()).collect();
    let gen = Generator { config, pool: &pool, shared: shared.clone(), zipf };

    let mut tasks = Vec::with_capacity(k);
    for (c, lexicon) in lexicons.iter().enumerate() {
        let domain: Vec<String> = (0..config.domain_vocab_size).map(|i| format!("c{c}d{i}")).collect();
        let mean_len = lexicon.iter().map(|&j| pool[j].len()).sum::<usize>() as f64 / lexicon.len() as f64;
        // A slot yields one O token or one mention of mean length m; solving
        // p·m / (p·m + 1 − p) = density for p.
        let d = config.entity_density;
        let start_p = (d / (mean_len - d * (mean_len - 1.0))).clamp(0.0, 1.0);
        let make = |split: Split, n: usize, stream: u64| -> Result<Corpus> {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream);
            let sentences = (0..n).map(|_| gen.sentence(&mut rng, lexicon, &domain, start_p)).collect();
            Corpus::new(format!("corpus{c}"), split, sentences, config.size_mode)
        };
        let train = make(Split::Train, config.sizes[c], 1 + 2 * c as u64)?;
        let n_test = ((config.sizes[c] as f64 * config.test_fraction).round() as usize).max(1);
        let test = make(Split::Test, n_test, 2 + 2 * c as u64)?;
        if train.declared_size() == 0 {
            return Err(Error::Config(format!("corpus {c} generated without entities")));
        }
        tasks.push(CorpusPair { train, test });
    }

    let mut master_lexicon = shared;
    master_lexicon.extend(pool.iter().flatten().cloned());
    Ok(Suite { tasks, master_lexicon, lexicons, entity_type: config.entity_type.clone() })
}
