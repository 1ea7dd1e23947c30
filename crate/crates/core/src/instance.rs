//! Canonical annotated instances.
//!
//! Offsets are counted in Unicode scalar values (`char`s), not bytes, so the
//! same record means the same thing regardless of how the text is encoded.

use serde::{Deserialize, Serialize};

/// A half-open character range `[start, end)` together with the text it covers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl Span {
    /// Builds a span by slicing `text`; `None` when the range is empty or out of bounds.
    pub fn from_text(text: &str, start: usize, end: usize) -> Option<Self> {
        let surface = char_slice(text, start, end)?;
        if start >= end {
            return None;
        }
        Some(Self {
            start,
            end,
            surface: surface.to_owned(),
        })
    }
}

/// Slices `text` by character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(Some(text.len()));
    let from = indices.nth(start)?;
    let to = if end == start {
        from
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[from..to])
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityMention {
    #[serde(flatten)]
    pub span: Span,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationMention {
    pub relation: String,
    pub head: Span,
    pub tail: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Argument {
    pub role: String,
    pub filler: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventMention {
    #[serde(rename = "type")]
    pub event_type: String,
    pub trigger: Span,
    #[serde(default)]
    pub arguments: Vec<Argument>,
}

/// One annotated sentence. Any of the annotation lists may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub dataset: String,
    pub text: String,
    #[serde(default)]
    pub entities: Vec<EntityMention>,
    #[serde(default)]
    pub relations: Vec<RelationMention>,
    #[serde(default)]
    pub events: Vec<EventMention>,
}

impl Instance {
    pub fn new(id: impl Into<String>, dataset: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            dataset: dataset.into(),
            text: text.into(),
            entities: Vec::new(),
            relations: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Span over the first occurrence of `surface` in the text.
    pub fn find_span(&self, surface: &str) -> Option<Span> {
        let byte = self.text.find(surface)?;
        let start = self.text[..byte].chars().count();
        Span::from_text(&self.text, start, start + surface.chars().count())
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty() && self.events.is_empty()
    }
}
