use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{extract_spans, Corpus, EncodedCorpus, Tag, TaskEncoding};
use crate::error::{Error, Result};
use crate::model::{predict_labels, ModelConfig, ParameterSet};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanScores {
    pub counts: EvalCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalCounts {
    /// Precision, recall and F1; each is 0 when its denominator is 0.
    pub fn scores(self) -> SpanScores {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        SpanScores { counts: self, precision, recall, f1 }
    }
}

/// Exact-boundary, exact-type entity matching.
pub fn span_f1(gold: &Corpus, pred: &[Vec<Tag>]) -> Result<SpanScores> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment(format!("{} gold sentences but {} predictions", gold.len(), pred.len())));
    }
    let mut counts = EvalCounts::default();
    for (i, (g, p)) in gold.sentences().iter().zip(pred).enumerate() {
        if g.tags.len() != p.len() {
            return Err(Error::Alignment(format!(
                "sentence {i}: {} gold tags but {} predicted",
                g.tags.len(),
                p.len()
            )));
        }
        let gs: HashSet<_> = extract_spans(&g.tags).into_iter().collect();
        let ps: HashSet<_> = extract_spans(p).into_iter().collect();
        let tp = gs.intersection(&ps).count();
        counts.tp += tp;
        counts.fp += ps.len() - tp;
        counts.fn_ += gs.len() - tp;
    }
    Ok(counts.scores())
}

/// Test corpus with its encoded token ids, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub corpus: Corpus,
    pub encoded: EncodedCorpus,
}

impl EvalSet {
    pub fn new(corpus: Corpus, encoding: &TaskEncoding) -> Result<Self> {
        let encoded = encoding.encode_corpus(&corpus)?;
        Ok(Self { corpus, encoded })
    }

    pub fn name(&self) -> &str {
        self.corpus.name()
    }
}

/// Tags predicted for every sentence. Tokens past the model's length limit
/// are tagged `O`.
pub fn predict_corpus(
    config: &ModelConfig,
    params: &ParameterSet,
    set: &EvalSet,
    encoding: &TaskEncoding,
) -> Result<Vec<Vec<Tag>>> {
    let mut out = Vec::with_capacity(set.corpus.len());
    let mut encoded = set.encoded.examples.iter();
    for s in set.corpus.sentences() {
        if s.is_empty() {
            out.push(Vec::new());
            continue;
        }
        let ex = encoded.next().expect("encoded corpus aligned with source");
        let mut tags = encoding.decode_labels(&predict_labels(config, params, &ex.tokens)?)?;
        tags.resize(s.len(), Tag::O);
        out.push(tags);
    }
    Ok(out)
}

pub fn evaluate(config: &ModelConfig, params: &ParameterSet, set: &EvalSet, encoding: &TaskEncoding) -> Result<SpanScores> {
    span_f1(&set.corpus, &predict_corpus(config, params, set, encoding)?)
}
