//! Two-column CoNLL files: `token<TAB>tag` per line, blank line between
//! sentences, UTF-8.

use std::io::{Read, Write};

use super::corpus::{Corpus, SizeMode, Sentence, Split};
use super::tags::{first_bio_violation, Tag};
use crate::error::{Error, Result};

pub fn read_conll(mut source: impl Read, name: &str, split: Split) -> Result<Corpus> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let text = match std::str::from_utf8(&bytes) {
        Ok(t) => t,
        Err(e) => {
            let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
            return Err(Error::Parse { line, message: "invalid UTF-8".into() });
        }
    };

    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut tags: Vec<Tag> = Vec::new();
    let mut start_line = 1;
    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<Tag>, start_line: usize| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        if let Some(pos) = first_bio_violation(tags) {
            return Err(Error::Validation(format!(
                "invalid BIO transition at line {} (token {pos} of the sentence): {}",
                start_line + pos,
                tags[pos]
            )));
        }
        sentences.push(Sentence { tokens: std::mem::take(tokens), tags: std::mem::take(tags) });
        Ok(())
    };

    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            flush(&mut tokens, &mut tags, start_line)?;
            continue;
        }
        if tokens.is_empty() {
            start_line = line_no;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0].is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `token<TAB>tag`, found {} field(s)", fields.len()),
            });
        }
        let tag = fields[1]
            .parse::<Tag>()
            .map_err(|message| Error::Parse { line: line_no, message })?;
        tokens.push(fields[0].to_string());
        tags.push(tag);
    }
    flush(&mut tokens, &mut tags, start_line)?;
    Corpus::new(name, split, sentences, SizeMode::Sentences)
}

/// Canonical form: one `token<TAB>tag` line per token, each sentence
/// followed by one blank line.
pub fn write_conll(corpus: &Corpus, mut sink: impl Write) -> Result<()> {
    let mut out = String::new();
    for s in corpus.sentences() {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&tag.to_string());
            out.push('\n');
        }
        out.push('\n');
    }
    sink.write_all(out.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<Corpus> {
        read_conll(s.as_bytes(), "t", Split::Test)
    }

    #[test]
    fn single_entity() {
        let c = read("flu\tB-Disease\n\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.sentences()[0].len(), 1);
        assert_eq!(c.num_entities(), 1);
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let text = "the\tO\nflu\tB-Disease\nvirus\tI-Disease\n\nno\tO\n\n";
        let c = read(text).unwrap();
        let mut out = Vec::new();
        write_conll(&c, &mut out).unwrap();
        assert_eq!(out, text.as_bytes());
        assert_eq!(read(std::str::from_utf8(&out).unwrap()).unwrap(), c);
    }

    #[test]
    fn missing_final_blank_line_and_crlf_accepted() {
        let c = read("a\tO\r\nb\tB-X\r\n\r\nc\tO").unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn three_space_separated_fields_is_parse_error() {
        match read("ok\tO\ntoken B-X extra\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(read("a\tO\textra\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read("a\tQ-X\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn bio_violation_reports_position() {
        match read("a\tO\n\nb\tO\nc\tI-X\n") {
            Err(Error::Validation(msg)) => assert!(msg.contains("line 4"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_utf8_is_parse_error() {
        let bytes = b"a\tO\n\xff\tO\n";
        assert!(matches!(read_conll(&bytes[..], "t", Split::Test), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_corpus_writes_nothing() {
        let c = read("").unwrap();
        assert!(c.is_empty());
        let mut out = Vec::new();
        write_conll(&c, &mut out).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn one_sentence_has_one_separator() {
        let c = read("a\tO\nb\tB-X\n").unwrap();
        let mut out = Vec::new();
        write_conll(&c, &mut out).unwrap();
        assert_eq!(out, b"a\tO\nb\tB-X\n\n");
    }
}
