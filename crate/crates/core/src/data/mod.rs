//! Corpora, BIO tags, CoNLL I/O, vocabularies and synthetic suites.

mod conll;
mod corpus;
mod encode;
mod synth;
mod tags;
mod vocab;

pub use conll::{read_conll, write_conll};
pub use corpus::{Corpus, Sentence, SizeMode, Split};
pub use encode::{EncodedCorpus, TaskEncoding, TrainingData};
pub use synth::{generate_suite, CorpusPair, Suite, SuiteConfig};
pub use tags::{extract_spans, first_bio_violation, validate_bio, LabelSet, Span, Tag};
pub use vocab::{build_vocab, normalize, Vocabulary, PAD, PAD_ID, UNK, UNK_ID};
