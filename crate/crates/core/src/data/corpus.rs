use serde::{Deserialize, Serialize};

use super::tags::{extract_spans, validate_bio, Tag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// What a corpus' declared size counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeMode {
    #[default]
    Sentences,
    Entities,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, tags: Vec<Tag>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::Validation(format!(
                "{} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        validate_bio(&tags)?;
        Ok(Self { tokens, tags })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_entities(&self) -> usize {
        extract_spans(&self.tags).len()
    }
}

/// A labeled corpus split with the size used as its averaging weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    name: String,
    split: Split,
    sentences: Vec<Sentence>,
    declared_size: usize,
}

impl Corpus {
    /// Builds a corpus whose declared size is computed under `mode`.
    pub fn new(name: impl Into<String>, split: Split, sentences: Vec<Sentence>, mode: SizeMode) -> Result<Self> {
        let declared_size = match mode {
            SizeMode::Sentences => sentences.len(),
            SizeMode::Entities => sentences.iter().map(Sentence::num_entities).sum(),
        };
        Self::with_declared_size(name, split, sentences, declared_size)
    }

    pub fn with_declared_size(
        name: impl Into<String>,
        split: Split,
        sentences: Vec<Sentence>,
        declared_size: usize,
    ) -> Result<Self> {
        let name = name.into();
        for (i, s) in sentences.iter().enumerate() {
            if s.tokens.len() != s.tags.len() {
                return Err(Error::Validation(format!("sentence {i} of {name}: token/tag length mismatch")));
            }
            validate_bio(&s.tags).map_err(|e| Error::Validation(format!("sentence {i} of {name}: {e}")))?;
        }
        if split == Split::Train && declared_size == 0 {
            return Err(Error::Validation(format!("training corpus {name} has declared size 0")));
        }
        Ok(Self { name, split, sentences, declared_size })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn declared_size(&self) -> usize {
        self.declared_size
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_entities(&self) -> usize {
        self.sentences.iter().map(Sentence::num_entities).sum()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Fraction of tokens tagged as part of an entity.
    pub fn entity_token_fraction(&self) -> f64 {
        let tokens = self.num_tokens();
        if tokens == 0 {
            return 0.0;
        }
        let inside = self.sentences.iter().flat_map(|s| &s.tags).filter(|t| **t != Tag::O).count();
        inside as f64 / tokens as f64
    }
}
