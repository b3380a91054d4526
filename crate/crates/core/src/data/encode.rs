use log::warn;

use super::corpus::{Corpus, Sentence};
use super::tags::{LabelSet, Tag};
use super::vocab::Vocabulary;
use crate::error::Result;
use crate::model::{Example, MAX_SEQ_LEN};

/// Source of training examples for one stage of a continual-learning run.
pub trait TrainingData {
    fn name(&self) -> &str;
    /// Size used as this corpus' averaging weight.
    fn declared_size(&self) -> usize;
    fn examples(&self) -> &[Example];
}

/// Maps between strings and model indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEncoding {
    pub vocab: Vocabulary,
    pub labels: LabelSet,
}

impl TaskEncoding {
    pub fn new(vocab: Vocabulary, labels: LabelSet) -> Self {
        Self { vocab, labels }
    }

    /// Token ids, truncated to the model's sequence limit.
    pub fn encode_tokens(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().take(MAX_SEQ_LEN).map(|t| self.vocab.id(t)).collect()
    }

    pub fn encode_sentence(&self, s: &Sentence) -> Result<Example> {
        let tokens = self.encode_tokens(&s.tokens);
        let labels = s.tags[..tokens.len()].iter().map(|t| self.labels.index(t)).collect::<Result<_>>()?;
        Ok(Example { tokens, labels })
    }

    pub fn decode_labels(&self, labels: &[u32]) -> Result<Vec<Tag>> {
        labels.iter().map(|&l| self.labels.tag(l)).collect()
    }

    pub fn encode_corpus(&self, corpus: &Corpus) -> Result<EncodedCorpus> {
        let truncated = corpus.sentences().iter().filter(|s| s.len() > MAX_SEQ_LEN).count();
        if truncated > 0 {
            warn!("{}: truncated {truncated} sentence(s) to {MAX_SEQ_LEN} tokens", corpus.name());
        }
        let examples = corpus
            .sentences()
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| self.encode_sentence(s))
            .collect::<Result<_>>()?;
        Ok(EncodedCorpus { name: corpus.name().to_string(), declared_size: corpus.declared_size(), examples })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCorpus {
    pub name: String,
    pub declared_size: usize,
    pub examples: Vec<Example>,
}

impl TrainingData for EncodedCorpus {
    fn name(&self) -> &str {
        &self.name
    }

    fn declared_size(&self) -> usize {
        self.declared_size
    }

    fn examples(&self) -> &[Example] {
        &self.examples
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{read_conll, Split};

    #[test]
    fn long_sentences_truncated() {
        let mut text = String::new();
        for i in 0..70 {
            text.push_str(&format!("t{i}\t{}\n", if i == 0 { "B-X" } else { "I-X" }));
        }
        let c = read_conll(text.as_bytes(), "c", Split::Train).unwrap();
        let enc = TaskEncoding::new(Vocabulary::build(["t0"], 10), LabelSet::single("X"));
        let e = enc.encode_corpus(&c).unwrap();
        assert_eq!(e.examples[0].tokens.len(), MAX_SEQ_LEN);
        assert_eq!(e.examples[0].labels[0], 1);
        assert_eq!(e.examples[0].labels[1], 2);
        assert_eq!(e.examples[0].tokens[1], crate::data::UNK_ID);
    }
}
