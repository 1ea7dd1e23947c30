//! Parsing free-form generations back into structured predictions.
//!
//! Every parser here is total: any input string yields a [`Prediction`].
//! Segments that do not fit the grammar are counted, labels outside the
//! schema are reported and dropped, and repeated tuples are deduplicated.
//! Separators are split on their first occurrence, so only the right-hand
//! side of a split may contain the same separator again.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::schema::LabelSchema;
use crate::task::TaskKind;
use crate::tuples::{
    ArgumentTuple, EntityTuple, EventTuple, Extraction, PairTuple, RelationTuple, RoleTuple,
    TriggerTuple, NONE,
};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub malformed_segments: usize,
    pub unknown_labels: Vec<String>,
    pub duplicates_dropped: usize,
    pub was_none: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub task: TaskKind,
    #[serde(flatten)]
    pub extraction: Extraction,
    pub diagnostics: ParseDiagnostics,
}

impl Prediction {
    fn empty(task: TaskKind) -> Self {
        Self { task, extraction: Extraction::default(), diagnostics: ParseDiagnostics::default() }
    }

    fn unknown(&mut self, label: &str) {
        let label = label.trim();
        if !self.diagnostics.unknown_labels.iter().any(|l| l == label) {
            self.diagnostics.unknown_labels.push(label.to_owned());
        }
    }

    fn insert<T: Ord>(diagnostics: &mut ParseDiagnostics, set: &mut BTreeSet<T>, item: T) {
        if !set.insert(item) {
            diagnostics.duplicates_dropped += 1;
        }
    }
}

/// Splits on the first `sep`; both sides trimmed and non-empty.
fn split_first(s: &str, sep: char) -> Option<(&str, &str)> {
    let (left, right) = s.split_once(sep)?;
    let (left, right) = (left.trim(), right.trim());
    (!left.is_empty() && !right.is_empty()).then_some((left, right))
}

/// Trims the generation and returns its non-empty `sep`-separated pieces, or
/// `None` when the whole generation is the `None` sentinel.
fn pieces<'a>(generation: &'a str, seps: &'a [char]) -> Option<impl Iterator<Item = &'a str> + 'a> {
    let trimmed = generation.trim();
    if trimmed.eq_ignore_ascii_case(NONE) {
        return None;
    }
    Some(trimmed.split(seps).map(str::trim).filter(|s| !s.is_empty()))
}

/// `label: surface; label: surface`.
pub fn parse_ner(generation: &str, schema: &LabelSchema) -> Prediction {
    parse_labeled_spans(generation, schema, TaskKind::Ner)
}

fn parse_labeled_spans(generation: &str, schema: &LabelSchema, task: TaskKind) -> Prediction {
    let mut pred = Prediction::empty(task);
    let Some(segments) = pieces(generation, &[';']) else {
        pred.diagnostics.was_none = true;
        return pred;
    };
    for segment in segments {
        let Some((label, surface)) = split_first(segment, ':') else {
            pred.diagnostics.malformed_segments += 1;
            continue;
        };
        match schema.match_label(label) {
            Some(label) => {
                let tuple = EntityTuple { label: label.to_owned(), surface: surface.to_owned() };
                Prediction::insert(&mut pred.diagnostics, &mut pred.extraction.entities, tuple);
            }
            None => pred.unknown(label),
        }
    }
    pred
}

/// `relation: head, tail; ...`.
pub fn parse_re(generation: &str, schema: &LabelSchema) -> Prediction {
    parse_triples(generation, schema, TaskKind::Re)
}

fn parse_triples(generation: &str, schema: &LabelSchema, task: TaskKind) -> Prediction {
    let mut pred = Prediction::empty(task);
    let Some(segments) = pieces(generation, &[';']) else {
        pred.diagnostics.was_none = true;
        return pred;
    };
    for segment in segments {
        let Some((relation, rest)) = split_first(segment, ':') else {
            pred.diagnostics.malformed_segments += 1;
            continue;
        };
        let Some((head, tail)) = split_first(rest, ',') else {
            pred.diagnostics.malformed_segments += 1;
            continue;
        };
        match schema.match_label(relation) {
            Some(relation) => {
                let tuple = RelationTuple { relation: relation.to_owned(), head: head.to_owned(), tail: tail.to_owned() };
                Prediction::insert(&mut pred.diagnostics, &mut pred.extraction.relations, tuple);
            }
            None => pred.unknown(relation),
        }
    }
    pred
}

/// `type: trigger, role: filler, ...; type: trigger`.
///
/// The first pair of a segment must name an event type; without one the
/// whole segment is malformed. Later pairs must name roles.
pub fn parse_ee(generation: &str, schema: &LabelSchema) -> Prediction {
    let mut pred = Prediction::empty(TaskKind::Ee);
    let Some(segments) = pieces(generation, &[';']) else {
        pred.diagnostics.was_none = true;
        return pred;
    };
    for segment in segments {
        let mut pairs = segment.split(',').map(str::trim).filter(|p| !p.is_empty());
        let Some(first) = pairs.next() else { continue };
        let Some((event_type, trigger)) = split_first(first, ':') else {
            pred.diagnostics.malformed_segments += 1;
            continue;
        };
        let Some(event_type) = schema.match_event_type(event_type) else {
            pred.unknown(event_type);
            pred.diagnostics.malformed_segments += 1;
            continue;
        };
        let mut event = EventTuple {
            event_type: event_type.to_owned(),
            trigger: trigger.to_owned(),
            arguments: BTreeSet::new(),
        };
        for pair in pairs {
            let Some((role, filler)) = split_first(pair, ':') else {
                pred.diagnostics.malformed_segments += 1;
                continue;
            };
            match schema.match_role(role) {
                Some(role) => {
                    let arg = ArgumentTuple { role: role.to_owned(), filler: filler.to_owned() };
                    Prediction::insert(&mut pred.diagnostics, &mut event.arguments, arg);
                }
                None => pred.unknown(role),
            }
        }
        Prediction::insert(&mut pred.diagnostics, &mut pred.extraction.events, event);
    }
    pred
}

/// Parses the output of an auxiliary task. Main tasks are delegated to their
/// own parsers, so this is total over every [`TaskKind`].
pub fn parse_aux(generation: &str, task: TaskKind, schema: &LabelSchema) -> Prediction {
    match task {
        TaskKind::Ner => parse_ner(generation, schema),
        TaskKind::Re => parse_re(generation, schema),
        TaskKind::Ee => parse_ee(generation, schema),
        TaskKind::Et => parse_labeled_spans(generation, schema, task),
        TaskKind::Epr => parse_triples(generation, schema, task),
        TaskKind::Es => parse_spans(generation),
        TaskKind::Ep => parse_pairs(generation),
        TaskKind::Eet => parse_triggers(generation, schema),
        TaskKind::Eea => parse_roles(generation, schema),
    }
}

/// Dispatches to the parser for `task`.
pub fn parse(generation: &str, task: TaskKind, schema: &LabelSchema) -> Prediction {
    parse_aux(generation, task, schema)
}

/// `word1, word2`.
fn parse_spans(generation: &str) -> Prediction {
    let mut pred = Prediction::empty(TaskKind::Es);
    let Some(items) = pieces(generation, &[',']) else {
        pred.diagnostics.was_none = true;
        return pred;
    };
    for item in items {
        Prediction::insert(&mut pred.diagnostics, &mut pred.extraction.spans, item.to_owned());
    }
    // "None," and friends: a lone sentinel is still the sentinel.
    if pred.extraction.spans.len() == 1
        && pred.extraction.spans.iter().all(|s| s.eq_ignore_ascii_case(NONE))
    {
        pred.extraction.spans.clear();
        pred.diagnostics.was_none = true;
    }
    pred
}

/// `word1, word2; word3, word4`.
fn parse_pairs(generation: &str) -> Prediction {
    let mut pred = Prediction::empty(TaskKind::Ep);
    let Some(segments) = pieces(generation, &[';']) else {
        pred.diagnostics.was_none = true;
        return pred;
    };
    for segment in segments {
        match split_first(segment, ',') {
            Some((head, tail)) => {
                let pair = PairTuple { head: head.to_owned(), tail: tail.to_owned() };
                Prediction::insert(&mut pred.diagnostics, &mut pred.extraction.pairs, pair);
            }
            None => pred.diagnostics.malformed_segments += 1,
        }
    }
    pred
}

/// `event type: trigger; ...`.
fn parse_triggers(generation: &str, schema: &LabelSchema) -> Prediction {
    let mut pred = Prediction::empty(TaskKind::Eet);
    let Some(segments) = pieces(generation, &[';']) else {
        pred.diagnostics.was_none = true;
        return pred;
    };
    for segment in segments {
        let Some((event_type, trigger)) = split_first(segment, ':') else {
            pred.diagnostics.malformed_segments += 1;
            continue;
        };
        match schema.match_event_type(event_type) {
            Some(event_type) => {
                let t = TriggerTuple { event_type: event_type.to_owned(), trigger: trigger.to_owned() };
                Prediction::insert(&mut pred.diagnostics, &mut pred.extraction.triggers, t);
            }
            None => pred.unknown(event_type),
        }
    }
    pred
}

/// `filler: role; filler: role`. Commas are accepted as pair separators too.
fn parse_roles(generation: &str, schema: &LabelSchema) -> Prediction {
    let mut pred = Prediction::empty(TaskKind::Eea);
    let Some(pairs) = pieces(generation, &[';', ',']) else {
        pred.diagnostics.was_none = true;
        return pred;
    };
    for pair in pairs {
        let Some((filler, role)) = split_first(pair, ':') else {
            pred.diagnostics.malformed_segments += 1;
            continue;
        };
        match schema.match_role(role) {
            Some(role) => {
                let r = RoleTuple { filler: filler.to_owned(), role: role.to_owned() };
                Prediction::insert(&mut pred.diagnostics, &mut pred.extraction.roles, r);
            }
            None => pred.unknown(role),
        }
    }
    pred
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::TaskFamily;
    use indexmap::IndexMap;
    use proptest::prelude::*;

    fn ner_schema() -> LabelSchema {
        LabelSchema::new("d", TaskFamily::Ner, vec!["person".into(), "organization".into()], IndexMap::new()).unwrap()
    }

    fn re_schema() -> LabelSchema {
        LabelSchema::new("d", TaskFamily::Re, vec!["born in".into(), "works for".into()], IndexMap::new()).unwrap()
    }

    fn ee_schema() -> LabelSchema {
        LabelSchema::events(
            "d",
            vec!["attack".into(), "meeting".into()],
            vec!["attacker".into(), "target".into()],
            IndexMap::new(),
        )
        .unwrap()
    }

    fn ent(label: &str, surface: &str) -> EntityTuple {
        EntityTuple { label: label.into(), surface: surface.into() }
    }

    #[test]
    fn ner_basic() {
        let p = parse_ner("person: Steve Jobs; organization: Apple", &ner_schema());
        assert_eq!(
            p.extraction.entities,
            BTreeSet::from([ent("person", "Steve Jobs"), ent("organization", "Apple")])
        );
        assert_eq!(p.diagnostics, ParseDiagnostics::default());
    }

    #[test]
    fn none_sentinel() {
        for g in ["None", "  none\n", "NONE"] {
            let p = parse_ner(g, &ner_schema());
            assert!(p.extraction.is_empty());
            assert!(p.diagnostics.was_none);
        }
        let p = parse_ner("none of the above", &ner_schema());
        assert!(!p.diagnostics.was_none);
        assert_eq!(p.diagnostics.malformed_segments, 1);
    }

    #[test]
    fn ner_reference_parse() {
        // segments: valid; unknown label; no colon
        let p = parse_ner("person: Ann; banana: X; person Ann", &ner_schema());
        assert_eq!(p.extraction.entities, BTreeSet::from([ent("person", "Ann")]));
        assert_eq!(p.diagnostics.unknown_labels, ["banana"]);
        assert_eq!(p.diagnostics.malformed_segments, 1);
    }

    #[test]
    fn ner_label_matching_is_case_insensitive_surface_verbatim() {
        let p = parse_ner(" PERSON :  Ann Lee ; Person: ann lee;person: Ann Lee", &ner_schema());
        assert_eq!(
            p.extraction.entities,
            BTreeSet::from([ent("person", "Ann Lee"), ent("person", "ann lee")])
        );
        assert_eq!(p.diagnostics.duplicates_dropped, 1);
    }

    #[test]
    fn ner_first_colon_rule() {
        let p = parse_ner("organization: Ratio: 3:1 Ltd", &ner_schema());
        assert_eq!(p.extraction.entities, BTreeSet::from([ent("organization", "Ratio: 3:1 Ltd")]));
    }

    #[test]
    fn re_grammar() {
        let p = parse_re("born in: Obama, Hawaii", &re_schema());
        assert_eq!(
            p.extraction.relations,
            BTreeSet::from([RelationTuple { relation: "born in".into(), head: "Obama".into(), tail: "Hawaii".into() }])
        );
        assert!(parse_re("None", &re_schema()).extraction.is_empty());
        let p = parse_re("born in: Obama Hawaii", &re_schema());
        assert_eq!(p.diagnostics.malformed_segments, 1);
        assert!(p.extraction.is_empty());
        let p = parse_re("born in: Obama, Honolulu, Hawaii", &re_schema());
        assert_eq!(p.extraction.relations.iter().next().unwrap().tail, "Honolulu, Hawaii");
    }

    #[test]
    fn ee_grammar() {
        let p = parse_ee("attack: bombed, attacker: rebels, target: convoy", &ee_schema());
        let ev = p.extraction.events.iter().next().unwrap();
        assert_eq!((ev.event_type.as_str(), ev.trigger.as_str()), ("attack", "bombed"));
        assert_eq!(
            ev.arguments,
            BTreeSet::from([
                ArgumentTuple { role: "attacker".into(), filler: "rebels".into() },
                ArgumentTuple { role: "target".into(), filler: "convoy".into() },
            ])
        );
        let p = parse_ee("attack: bombed", &ee_schema());
        assert!(p.extraction.events.iter().next().unwrap().arguments.is_empty());
        let p = parse_ee("meeting: met; attack: hit, target: base", &ee_schema());
        assert_eq!(p.extraction.events.len(), 2);
    }

    #[test]
    fn ee_bad_first_pair_is_malformed() {
        let p = parse_ee("attacker: rebels, target: convoy; party: fun", &ee_schema());
        assert!(p.extraction.is_empty());
        assert_eq!(p.diagnostics.malformed_segments, 2);
        assert_eq!(p.diagnostics.unknown_labels, ["attacker", "party"]);
        let p = parse_ee("attack: hit, victim: x, target", &ee_schema());
        assert_eq!(p.extraction.events.len(), 1);
        assert_eq!(p.diagnostics.unknown_labels, ["victim"]);
        assert_eq!(p.diagnostics.malformed_segments, 1);
    }

    #[test]
    fn aux_grammars() {
        let p = parse_aux("Steve Jobs, Apple", TaskKind::Es, &ner_schema());
        assert_eq!(p.extraction.spans, BTreeSet::from(["Steve Jobs".to_owned(), "Apple".to_owned()]));
        let p = parse_aux("attack: bombed", TaskKind::Eet, &ee_schema());
        assert_eq!(
            p.extraction.triggers,
            BTreeSet::from([TriggerTuple { event_type: "attack".into(), trigger: "bombed".into() }])
        );
        let p = parse_aux("Obama, Hawaii; Paris", TaskKind::Ep, &re_schema());
        assert_eq!(p.extraction.pairs.len(), 1);
        assert_eq!(p.diagnostics.malformed_segments, 1);
        let p = parse_aux("born in: Obama, Hawaii", TaskKind::Epr, &re_schema());
        assert_eq!(p.task, TaskKind::Epr);
        assert_eq!(p.extraction.relations.len(), 1);
        let p = parse_aux("person: Ann", TaskKind::Et, &ner_schema());
        assert_eq!(p.extraction.entities.len(), 1);
    }

    #[test]
    fn eea_reference_parse() {
        // "rebels: attacker" is kept; the trailing "extra" has no role.
        let p = parse_aux("rebels: attacker, extra", TaskKind::Eea, &ee_schema());
        assert_eq!(
            p.extraction.roles,
            BTreeSet::from([RoleTuple { filler: "rebels".into(), role: "attacker".into() }])
        );
        assert_eq!(p.diagnostics.malformed_segments, 1);
    }

    #[test]
    fn es_lone_none_is_sentinel() {
        for g in ["None,", " none , ", "None, None"] {
            let p = parse_aux(g, TaskKind::Es, &ner_schema());
            assert!(p.extraction.is_empty(), "{g}");
            assert!(p.diagnostics.was_none);
        }
        assert_eq!(parse_aux("None, Apple", TaskKind::Es, &ner_schema()).extraction.spans.len(), 2);
    }

    #[test]
    fn degenerate_inputs() {
        for g in ["", "   ", ";;;", ":", ",", "\n\n", ": ;", "a:;:b"] {
            for task in TaskKind::ALL {
                // Span surfaces may legitimately contain ':' and ';'.
                if task == TaskKind::Es && !g.trim_matches(|c: char| c == ',' || c.is_whitespace()).is_empty() {
                    continue;
                }
                let schema = match task.family() {
                    TaskFamily::Ner => ner_schema(),
                    TaskFamily::Re => re_schema(),
                    TaskFamily::Ee => ee_schema(),
                };
                let p = parse(g, task, &schema);
                assert!(p.extraction.is_empty(), "{task} {g:?}");
            }
        }
    }

    fn schema_closed(p: &Prediction, schema: &LabelSchema) -> bool {
        let e = &p.extraction;
        e.entities.iter().all(|t| schema.has_label(&t.label))
            && e.relations.iter().all(|t| schema.has_label(&t.relation))
            && e.events.iter().all(|ev| {
                schema.has_event_type(&ev.event_type) && ev.arguments.iter().all(|a| schema.has_role(&a.role))
            })
            && e.triggers.iter().all(|t| schema.has_event_type(&t.event_type))
            && e.roles.iter().all(|r| schema.has_role(&r.role))
    }

    fn generation() -> impl Strategy<Value = String> {
        let atoms = prop::sample::select(vec![
            "person", "PERSON", "organization", "born in", "attack", "meeting", "attacker", "target",
            "Ann", "Hawaii", "None", "none", ":", ";", ",", " ", "\n", "é", "日本", "x:y", "  ",
        ]);
        prop_oneof![
            prop::collection::vec(atoms, 0..24).prop_map(|v| v.concat()),
            any::<String>(),
        ]
    }

    proptest! {
        #[test]
        fn parsers_are_total_and_schema_closed(g in generation()) {
            for task in TaskKind::ALL {
                for schema in [ner_schema(), re_schema(), ee_schema()] {
                    let p = parse(&g, task, &schema);
                    prop_assert!(schema_closed(&p, &schema));
                }
            }
        }

        #[test]
        fn reserialization_is_idempotent(g in generation()) {
            for task in TaskKind::ALL {
                let schema = match task.family() {
                    TaskFamily::Ner => ner_schema(),
                    TaskFamily::Re => re_schema(),
                    TaskFamily::Ee => ee_schema(),
                };
                let once = parse(&g, task, &schema);
                let again = parse(&once.extraction.render(task), task, &schema);
                prop_assert_eq!(&again.extraction, &once.extraction, "task {} on {:?}", task, g);
            }
        }
    }
}
