use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A BIO tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    O,
    B(String),
    I(String),
}

impl Tag {
    pub fn entity_type(&self) -> Option<&str> {
        match self {
            Tag::O => None,
            Tag::B(t) | Tag::I(t) => Some(t),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(t) => write!(f, "B-{t}"),
            Tag::I(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "O" {
            return Ok(Tag::O);
        }
        match s.split_once('-') {
            Some(("B", t)) if !t.is_empty() => Ok(Tag::B(t.to_string())),
            Some(("I", t)) if !t.is_empty() => Ok(Tag::I(t.to_string())),
            _ => Err(format!("not a BIO tag: {s:?}")),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Position of the first invalid `I-X` in a tag sequence, if any.
///
/// `I-X` must continue a span of the same type: it may not open a sentence or
/// follow `O` or a tag of a different type.
pub fn first_bio_violation(tags: &[Tag]) -> Option<usize> {
    let mut prev: Option<&Tag> = None;
    for (i, tag) in tags.iter().enumerate() {
        if let Tag::I(t) = tag {
            let continues = matches!(prev, Some(Tag::B(p)) | Some(Tag::I(p)) if p == t);
            if !continues {
                return Some(i);
            }
        }
        prev = Some(tag);
    }
    None
}

pub fn validate_bio(tags: &[Tag]) -> Result<()> {
    match first_bio_violation(tags) {
        None => Ok(()),
        Some(i) => Err(Error::Validation(format!(
            "invalid BIO transition at position {i}: {} after {}",
            tags[i],
            if i == 0 { "sentence start".to_string() } else { tags[i - 1].to_string() }
        ))),
    }
}

/// Entity span `[start, end)` with its type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

/// Maximal spans of a tag sequence. A stray `I-X` (one that does not
/// continue an `X` span) opens a new span, as conlleval does.
pub fn extract_spans(tags: &[Tag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::O => {
                if let Some((s, t)) = open.take() {
                    spans.push(Span { start: s, end: i, entity_type: t.to_string() });
                }
            }
            Tag::B(t) => {
                if let Some((s, pt)) = open.take() {
                    spans.push(Span { start: s, end: i, entity_type: pt.to_string() });
                }
                open = Some((i, t));
            }
            Tag::I(t) => match open {
                Some((_, pt)) if pt == t => {}
                _ => {
                    if let Some((s, pt)) = open.take() {
                        spans.push(Span { start: s, end: i, entity_type: pt.to_string() });
                    }
                    open = Some((i, t));
                }
            },
        }
    }
    if let Some((s, t)) = open {
        spans.push(Span { start: s, end: tags.len(), entity_type: t.to_string() });
    }
    spans
}

/// Dense label indices: `O` = 0, then `B-X`, `I-X` for each entity type in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    entity_types: Vec<String>,
}

impl LabelSet {
    pub fn new(entity_types: Vec<String>) -> Result<Self> {
        if entity_types.is_empty() {
            return Err(Error::Argument("label set needs at least one entity type".into()));
        }
        Ok(Self { entity_types })
    }

    pub fn single(entity_type: &str) -> Self {
        Self { entity_types: vec![entity_type.to_string()] }
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    pub fn len(&self) -> usize {
        1 + 2 * self.entity_types.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, tag: &Tag) -> Result<u32> {
        let find = |t: &str| {
            self.entity_types
                .iter()
                .position(|e| e == t)
                .ok_or_else(|| Error::Validation(format!("unknown entity type {t:?}")))
        };
        Ok(match tag {
            Tag::O => 0,
            Tag::B(t) => 1 + 2 * find(t)? as u32,
            Tag::I(t) => 2 + 2 * find(t)? as u32,
        })
    }

    pub fn tag(&self, index: u32) -> Result<Tag> {
        if index == 0 {
            return Ok(Tag::O);
        }
        let k = (index as usize - 1) / 2;
        let t = self
            .entity_types
            .get(k)
            .ok_or_else(|| Error::Argument(format!("label index {index} out of range")))?
            .clone();
        Ok(if index % 2 == 1 { Tag::B(t) } else { Tag::I(t) })
    }
}
