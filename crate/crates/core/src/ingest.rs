//! Reading raw corpora into canonical [`Instance`] records.
//!
//! Two input shapes are supported: CoNLL-style token/tag columns and the
//! canonical JSONL layout. Bad records never abort a file; they are dropped
//! and reported as [`Diagnostic`]s.

use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{char_slice, EntityMention, Instance, Span};
use crate::schema::{LabelSchema, TaskFamily};

/// Tag conventions for token-tagged corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaggingScheme {
    /// IOB1: `I-` may open an entity; `B-` only separates adjacent same-type entities.
    Bio,
    /// IOB2: every entity opens with `B-`. A stray `I-` is repaired to `B-`.
    Bio2,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn parse(raw: &str) -> Option<Self> {
        if raw == "O" {
            return Some(Tag::Outside);
        }
        let (prefix, label) = raw.split_at_checked(2)?;
        if label.is_empty() {
            return None;
        }
        match prefix {
            "B-" => Some(Tag::Begin(label.to_owned())),
            "I-" => Some(Tag::Inside(label.to_owned())),
            _ => None,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(l) => write!(f, "B-{l}"),
            Tag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

/// An entity over a token range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// Decodes a tag sequence into token spans. Returns the spans and the number
/// of `I-` tags that had to be treated as `B-` under IOB2.
pub fn decode_bio(tags: &[Tag], scheme: TaggingScheme) -> (Vec<TokenSpan>, usize) {
    let mut spans = Vec::new();
    let mut open: Option<TokenSpan> = None;
    let mut repairs = 0;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::Outside => spans.extend(open.take()),
            Tag::Begin(label) => {
                spans.extend(open.take());
                open = Some(TokenSpan { start: i, end: i + 1, label: label.clone() });
            }
            Tag::Inside(label) => match open.as_mut() {
                Some(span) if &span.label == label => span.end = i + 1,
                _ => {
                    if scheme == TaggingScheme::Bio2 {
                        repairs += 1;
                    }
                    spans.extend(open.take());
                    open = Some(TokenSpan { start: i, end: i + 1, label: label.clone() });
                }
            },
        }
    }
    spans.extend(open);
    (spans, repairs)
}

/// Inverse of [`decode_bio`] for non-overlapping spans sorted by start.
pub fn encode_bio(len: usize, spans: &[TokenSpan], scheme: TaggingScheme) -> Vec<Tag> {
    let mut tags = vec![Tag::Outside; len];
    let mut previous: Option<&TokenSpan> = None;
    for span in spans {
        for (offset, tag) in tags[span.start..span.end].iter_mut().enumerate() {
            let first = offset == 0;
            *tag = match scheme {
                TaggingScheme::Bio2 if first => Tag::Begin(span.label.clone()),
                TaggingScheme::Bio
                    if first
                        && previous.is_some_and(|p| p.end == span.start && p.label == span.label) =>
                {
                    Tag::Begin(span.label.clone())
                }
                _ => Tag::Inside(span.label.clone()),
            };
        }
        previous = Some(span);
    }
    tags
}

/// Joins tokens with single spaces and returns the character offset at which
/// each token starts.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> (String, Vec<usize>) {
    let mut text = String::new();
    let mut starts = Vec::with_capacity(tokens.len());
    let mut chars = 0;
    for (i, token) in tokens.iter().enumerate() {
        if i > 0 {
            text.push(' ');
            chars += 1;
        }
        starts.push(chars);
        text.push_str(token.as_ref());
        chars += token.as_ref().chars().count();
    }
    (text, starts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MalformedTag,
    MalformedLine,
    ParseError,
    Invalid,
    UnknownLabel,
    DuplicateId,
    DuplicateCollapsed,
    RepairedTag,
}

/// A problem found while ingesting one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub record: Option<String>,
    pub kind: DiagnosticKind,
    pub message: String,
    /// `false` when the record was still accepted.
    pub rejected: bool,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}", self.line)?;
        if let Some(id) = &self.record {
            write!(f, " ({id})")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub instances: Vec<Instance>,
    pub diagnostics: Vec<Diagnostic>,
}

impl IngestReport {
    pub fn rejected(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.rejected).count()
    }

    pub fn count(&self, kind: &DiagnosticKind) -> usize {
        self.diagnostics.iter().filter(|d| &d.kind == kind).count()
    }
}

/// Reads CoNLL-style columns: the first field is the token, the last is the
/// tag, blank lines end a sentence and `-DOCSTART-` lines are skipped.
///
/// Without a schema, raw tag labels are kept as-is; with one they are mapped
/// to canonical labels and unmapped labels reject the sentence.
pub fn ingest_token_tagged<R: BufRead>(
    source: R,
    scheme: TaggingScheme,
    dataset: &str,
    schema: Option<&LabelSchema>,
) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    let mut sentence = SentenceBuf::default();
    let mut index = 0;
    let mut line_no = 0;
    for line in source.lines() {
        let line = line?;
        line_no += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !sentence.tokens.is_empty() {
                sentence.finish(&mut report, scheme, dataset, index, schema);
                index += 1;
            }
            sentence = SentenceBuf::default();
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            continue;
        }
        if sentence.tokens.is_empty() {
            sentence.first_line = line_no;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 2 {
            sentence.error.get_or_insert((
                line_no,
                DiagnosticKind::MalformedLine,
                format!("expected `token tag`, found `{trimmed}`"),
            ));
            sentence.tokens.push(fields[0].to_owned());
            sentence.tags.push(Tag::Outside);
            continue;
        }
        let raw_tag = fields[fields.len() - 1];
        let tag = Tag::parse(raw_tag).unwrap_or_else(|| {
            sentence.error.get_or_insert((
                line_no,
                DiagnosticKind::MalformedTag,
                format!("malformed tag `{raw_tag}` (expected O, B-<type> or I-<type>)"),
            ));
            Tag::Outside
        });
        sentence.tokens.push(fields[0].to_owned());
        sentence.tags.push(tag);
    }
    if !sentence.tokens.is_empty() {
        sentence.finish(&mut report, scheme, dataset, index, schema);
    }
    Ok(report)
}

#[derive(Default)]
struct SentenceBuf {
    first_line: usize,
    tokens: Vec<String>,
    tags: Vec<Tag>,
    error: Option<(usize, DiagnosticKind, String)>,
}

impl SentenceBuf {
    fn finish(
        self,
        report: &mut IngestReport,
        scheme: TaggingScheme,
        dataset: &str,
        index: usize,
        schema: Option<&LabelSchema>,
    ) {
        let id = format!("{dataset}-{index}");
        if let Some((line, kind, message)) = self.error {
            report.diagnostics.push(Diagnostic {
                line,
                record: Some(id),
                kind,
                message,
                rejected: true,
            });
            return;
        }
        let (spans, repairs) = decode_bio(&self.tags, scheme);
        if repairs > 0 {
            report.diagnostics.push(Diagnostic {
                line: self.first_line,
                record: Some(id.clone()),
                kind: DiagnosticKind::RepairedTag,
                message: format!("{repairs} I- tag(s) without a preceding B- treated as B-"),
                rejected: false,
            });
        }
        let (text, starts) = join_tokens(&self.tokens);
        let mut instance = Instance::new(id, dataset, text);
        for span in spans {
            let start = starts[span.start];
            let end = starts[span.end - 1] + self.tokens[span.end - 1].chars().count();
            let span_text = Span::from_text(&instance.text, start, end)
                .expect("token offsets lie inside the joined text");
            instance.entities.push(EntityMention { span: span_text, label: span.label });
        }
        if let Some(schema) = schema {
            if let Err(unknown) = apply_schema(&mut instance, schema) {
                report.diagnostics.push(Diagnostic {
                    line: self.first_line,
                    record: Some(instance.id),
                    kind: DiagnosticKind::UnknownLabel,
                    message: format!("unknown raw label(s): {}", unknown.join(", ")),
                    rejected: true,
                });
                return;
            }
        }
        report.instances.push(instance);
    }
}

/// Rewrites the labels of the schema's annotation family from raw to
/// canonical form. On failure returns every raw label without a mapping.
pub fn apply_schema(instance: &mut Instance, schema: &LabelSchema) -> std::result::Result<(), Vec<String>> {
    fn map(canonical: Option<String>, label: &mut String, unknown: &mut Vec<String>) {
        match canonical {
            Some(c) => *label = c,
            None => {
                if !unknown.contains(label) {
                    unknown.push(label.clone());
                }
            }
        }
    }
    let mut unknown = Vec::new();
    match schema.task() {
        TaskFamily::Ner => {
            for e in &mut instance.entities {
                map(schema.canonical_label(&e.label).map(str::to_owned), &mut e.label, &mut unknown);
            }
        }
        TaskFamily::Re => {
            for r in &mut instance.relations {
                map(schema.canonical_label(&r.relation).map(str::to_owned), &mut r.relation, &mut unknown);
            }
        }
        TaskFamily::Ee => {
            for ev in &mut instance.events {
                map(schema.canonical_event_type(&ev.event_type).map(str::to_owned), &mut ev.event_type, &mut unknown);
                for arg in &mut ev.arguments {
                    map(schema.canonical_role(&arg.role).map(str::to_owned), &mut arg.role, &mut unknown);
                }
            }
        }
    }
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(unknown)
    }
}

/// Reads canonical JSONL. With a schema, labels of `task`'s annotation family
/// are mapped from raw to canonical names; other annotation lists pass
/// through with only their spans checked.
pub fn ingest_json<R: BufRead>(
    source: R,
    task: TaskFamily,
    schema: Option<&LabelSchema>,
) -> Result<IngestReport> {
    if let Some(schema) = schema {
        if schema.task() != task {
            return Err(crate::Error::IncompatibleTask {
                task: task.to_string(),
                dataset: schema.dataset().to_owned(),
                reason: format!("schema is for {}", schema.task()),
            });
        }
    }
    let mut report = IngestReport::default();
    let mut seen_ids = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let reject = |record: Option<String>, kind, message| Diagnostic {
            line: line_no,
            record,
            kind,
            message,
            rejected: true,
        };
        let mut instance: Instance = match serde_json::from_str(&line) {
            Ok(instance) => instance,
            Err(err) => {
                report
                    .diagnostics
                    .push(reject(None, DiagnosticKind::ParseError, err.to_string()));
                continue;
            }
        };
        let id = Some(instance.id.clone());
        let violations = validate_spans(&instance);
        if !violations.is_empty() {
            let message = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            report.diagnostics.push(reject(id, DiagnosticKind::Invalid, message));
            continue;
        }
        if let Some(schema) = schema {
            if let Err(unknown) = apply_schema(&mut instance, schema) {
                let message = format!("unknown raw label(s) with no schema mapping: {}", unknown.join(", "));
                report.diagnostics.push(reject(id, DiagnosticKind::UnknownLabel, message));
                continue;
            }
        }
        if !seen_ids.insert((instance.dataset.clone(), instance.id.clone())) {
            let message = format!("duplicate id `{}` in dataset `{}`", instance.id, instance.dataset);
            report.diagnostics.push(reject(id, DiagnosticKind::DuplicateId, message));
            continue;
        }
        let collapsed = collapse_duplicates(&mut instance);
        if collapsed > 0 {
            report.diagnostics.push(Diagnostic {
                line: line_no,
                record: id,
                kind: DiagnosticKind::DuplicateCollapsed,
                message: format!("{collapsed} duplicate mention(s) collapsed"),
                rejected: false,
            });
        }
        report.instances.push(instance);
    }
    Ok(report)
}

/// Writes instances as canonical JSONL, one per line.
pub fn write_jsonl<W: Write>(mut sink: W, instances: &[Instance]) -> Result<()> {
    for instance in instances {
        serde_json::to_writer(&mut sink, instance)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// Removes repeated identical mentions, keeping first occurrences. Returns how
/// many were removed.
pub fn collapse_duplicates(instance: &mut Instance) -> usize {
    dedup_in_order(&mut instance.entities)
        + dedup_in_order(&mut instance.relations)
        + dedup_in_order(&mut instance.events)
}

fn dedup_in_order<T: Clone + Eq + Hash>(items: &mut Vec<T>) -> usize {
    let before = items.len();
    let mut seen = HashSet::with_capacity(before);
    items.retain(|item| seen.insert(item.clone()));
    before - items.len()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    SpanOutOfBounds,
    EmptySpan,
    SurfaceMismatch { expected: String, found: String },
    UnknownLabel(String),
    DuplicateMention,
}

/// One broken invariant, located by field path (e.g. `events[0].arguments[1]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.field)?;
        match &self.kind {
            ViolationKind::SpanOutOfBounds => f.write_str("span out of bounds"),
            ViolationKind::EmptySpan => f.write_str("empty span"),
            ViolationKind::SurfaceMismatch { expected, found } => {
                write!(f, "surface mismatch (text has `{expected}`, record has `{found}`)")
            }
            ViolationKind::UnknownLabel(label) => write!(f, "unknown label `{label}`"),
            ViolationKind::DuplicateMention => f.write_str("duplicate mention"),
        }
    }
}

fn check_span(text: &str, span: &Span, field: String, out: &mut Vec<Violation>) {
    if span.start >= span.end {
        out.push(Violation { field, kind: ViolationKind::EmptySpan });
        return;
    }
    match char_slice(text, span.start, span.end) {
        None => out.push(Violation { field, kind: ViolationKind::SpanOutOfBounds }),
        Some(slice) if slice != span.surface => out.push(Violation {
            field,
            kind: ViolationKind::SurfaceMismatch {
                expected: slice.to_owned(),
                found: span.surface.clone(),
            },
        }),
        Some(_) => {}
    }
}

fn validate_spans(instance: &Instance) -> Vec<Violation> {
    let text = &instance.text;
    let mut out = Vec::new();
    for (i, e) in instance.entities.iter().enumerate() {
        check_span(text, &e.span, format!("entities[{i}]"), &mut out);
    }
    for (i, r) in instance.relations.iter().enumerate() {
        check_span(text, &r.head, format!("relations[{i}].head"), &mut out);
        check_span(text, &r.tail, format!("relations[{i}].tail"), &mut out);
    }
    for (i, ev) in instance.events.iter().enumerate() {
        check_span(text, &ev.trigger, format!("events[{i}].trigger"), &mut out);
        for (j, arg) in ev.arguments.iter().enumerate() {
            check_span(text, &arg.filler, format!("events[{i}].arguments[{j}]"), &mut out);
        }
    }
    out
}

fn check_duplicates<T: Eq + Hash>(items: &[T], name: &str, out: &mut Vec<Violation>) {
    let mut seen = HashSet::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        if !seen.insert(item) {
            out.push(Violation { field: format!("{name}[{i}]"), kind: ViolationKind::DuplicateMention });
        }
    }
}

/// Checks every invariant of `instance` against `schema` and returns all
/// violations found; an empty list means the instance is valid.
///
/// Labels are only checked for the annotation family the schema describes.
pub fn validate_instance(instance: &Instance, schema: &LabelSchema) -> Vec<Violation> {
    let mut out = validate_spans(instance);
    let mut unknown = |field: String, label: &str, known: bool| {
        if !known {
            out.push(Violation { field, kind: ViolationKind::UnknownLabel(label.to_owned()) });
        }
    };
    match schema.task() {
        TaskFamily::Ner => {
            for (i, e) in instance.entities.iter().enumerate() {
                unknown(format!("entities[{i}]"), &e.label, schema.has_label(&e.label));
            }
        }
        TaskFamily::Re => {
            for (i, r) in instance.relations.iter().enumerate() {
                unknown(format!("relations[{i}]"), &r.relation, schema.has_label(&r.relation));
            }
        }
        TaskFamily::Ee => {
            for (i, ev) in instance.events.iter().enumerate() {
                unknown(format!("events[{i}]"), &ev.event_type, schema.has_event_type(&ev.event_type));
                for (j, arg) in ev.arguments.iter().enumerate() {
                    unknown(format!("events[{i}].arguments[{j}]"), &arg.role, schema.has_role(&arg.role));
                }
            }
        }
    }
    check_duplicates(&instance.entities, "entities", &mut out);
    check_duplicates(&instance.relations, "relations", &mut out);
    check_duplicates(&instance.events, "events", &mut out);
    out
}
