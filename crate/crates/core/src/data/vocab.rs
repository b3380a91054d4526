use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::corpus::Corpus;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

/// Closed, lowercased token vocabulary with reserved PAD (0) and UNK (1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

pub fn normalize(token: &str) -> String {
    token.to_lowercase()
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { tokens, index }
    }

    /// Keeps the `max_size` most frequent tokens (ties broken
    /// lexicographically); PAD and UNK come on top of that.
    pub fn build<'a>(token_stream: impl IntoIterator<Item = &'a str>, max_size: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in token_stream {
            *counts.entry(normalize(t)).or_default() += 1;
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size);
        let mut tokens = vec![PAD.to_string(), UNK.to_string()];
        tokens.extend(ranked.into_iter().map(|(t, _)| t));
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(&normalize(token)).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuilds the lookup table after deserialisation.
    pub fn reindex(&mut self) {
        *self = Self::from_tokens(std::mem::take(&mut self.tokens));
    }
}

/// Vocabulary over the tokens of `corpora`.
pub fn build_vocab(corpora: &[&Corpus], max_size: usize) -> Vocabulary {
    Vocabulary::build(
        corpora.iter().flat_map(|c| c.sentences()).flat_map(|s| s.tokens.iter().map(String::as_str)),
        max_size,
    )
}
