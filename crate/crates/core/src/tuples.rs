//! Set-valued structured outputs shared by the parser, the scorer and the
//! round-trip checks.
//!
//! Surfaces are stored trimmed; labels are canonical.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::task::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityTuple {
    pub label: String,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationTuple {
    pub relation: String,
    pub head: String,
    pub tail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArgumentTuple {
    pub role: String,
    pub filler: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventTuple {
    pub event_type: String,
    pub trigger: String,
    pub arguments: BTreeSet<ArgumentTuple>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairTuple {
    pub head: String,
    pub tail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriggerTuple {
    pub event_type: String,
    pub trigger: String,
}

/// `(filler, role)` for one argument of the event named in an EEA prompt.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoleTuple {
    pub filler: String,
    pub role: String,
}

/// Event-argument metric tuple: `(event type, role, filler)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventArgumentTuple {
    pub event_type: String,
    pub role: String,
    pub filler: String,
}

/// The structured content of one output. Only the fields relevant to the
/// task are populated: `entities` for NER/ET, `relations` for RE/EPR,
/// `events` for EE, `spans` for ES, `pairs` for EP, `triggers` for EET and
/// `roles` for EEA.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub entities: BTreeSet<EntityTuple>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub relations: BTreeSet<RelationTuple>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub events: BTreeSet<EventTuple>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub spans: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub pairs: BTreeSet<PairTuple>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub triggers: BTreeSet<TriggerTuple>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub roles: BTreeSet<RoleTuple>,
}

fn trimmed(s: &str) -> String {
    s.trim().to_owned()
}

impl Extraction {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
            && self.relations.is_empty()
            && self.events.is_empty()
            && self.spans.is_empty()
            && self.pairs.is_empty()
            && self.triggers.is_empty()
            && self.roles.is_empty()
    }

    /// Gold tuples of `instance` for `task`. `event` selects the event an EEA
    /// prompt asks about and is required for EEA only.
    pub fn gold(instance: &Instance, task: TaskKind, event: Option<usize>) -> Result<Self> {
        let mut out = Extraction::default();
        match task {
            TaskKind::Ner | TaskKind::Et => {
                out.entities = instance
                    .entities
                    .iter()
                    .map(|e| EntityTuple { label: e.label.clone(), surface: trimmed(&e.span.surface) })
                    .collect();
            }
            TaskKind::Es => {
                out.spans = instance.entities.iter().map(|e| trimmed(&e.span.surface)).collect();
            }
            TaskKind::Re | TaskKind::Epr => {
                out.relations = instance
                    .relations
                    .iter()
                    .map(|r| RelationTuple {
                        relation: r.relation.clone(),
                        head: trimmed(&r.head.surface),
                        tail: trimmed(&r.tail.surface),
                    })
                    .collect();
            }
            TaskKind::Ep => {
                out.pairs = instance
                    .relations
                    .iter()
                    .map(|r| PairTuple { head: trimmed(&r.head.surface), tail: trimmed(&r.tail.surface) })
                    .collect();
            }
            TaskKind::Ee => {
                out.events = instance
                    .events
                    .iter()
                    .map(|ev| EventTuple {
                        event_type: ev.event_type.clone(),
                        trigger: trimmed(&ev.trigger.surface),
                        arguments: ev
                            .arguments
                            .iter()
                            .map(|a| ArgumentTuple { role: a.role.clone(), filler: trimmed(&a.filler.surface) })
                            .collect(),
                    })
                    .collect();
            }
            TaskKind::Eet => {
                out.triggers = instance
                    .events
                    .iter()
                    .map(|ev| TriggerTuple { event_type: ev.event_type.clone(), trigger: trimmed(&ev.trigger.surface) })
                    .collect();
            }
            TaskKind::Eea => {
                let ev = event_target(instance, event)?;
                out.roles = ev
                    .arguments
                    .iter()
                    .map(|a| RoleTuple { filler: trimmed(&a.filler.surface), role: a.role.clone() })
                    .collect();
            }
        }
        Ok(out)
    }

    /// Renders the tuples for `task` in the output grammar, in set order.
    pub fn render(&self, task: TaskKind) -> String {
        let segments: Vec<String> = match task {
            TaskKind::Ner | TaskKind::Et => {
                self.entities.iter().map(|e| format!("{}: {}", e.label, e.surface)).collect()
            }
            TaskKind::Re | TaskKind::Epr => self
                .relations
                .iter()
                .map(|r| format!("{}: {}, {}", r.relation, r.head, r.tail))
                .collect(),
            TaskKind::Ee => self
                .events
                .iter()
                .map(|ev| {
                    let mut s = format!("{}: {}", ev.event_type, ev.trigger);
                    for a in &ev.arguments {
                        s.push_str(&format!(", {}: {}", a.role, a.filler));
                    }
                    s
                })
                .collect(),
            TaskKind::Es => return none_if_empty(self.spans.iter().cloned().collect::<Vec<_>>().join(", ")),
            TaskKind::Ep => self.pairs.iter().map(|p| format!("{}, {}", p.head, p.tail)).collect(),
            TaskKind::Eet => {
                self.triggers.iter().map(|t| format!("{}: {}", t.event_type, t.trigger)).collect()
            }
            TaskKind::Eea => self.roles.iter().map(|r| format!("{}: {}", r.filler, r.role)).collect(),
        };
        none_if_empty(segments.join("; "))
    }

    /// `(event type, trigger)` tuples of the EE events.
    pub fn event_triggers(&self) -> BTreeSet<TriggerTuple> {
        self.events
            .iter()
            .map(|ev| TriggerTuple { event_type: ev.event_type.clone(), trigger: ev.trigger.clone() })
            .collect()
    }

    /// `(event type, role, filler)` tuples pooled over all EE events.
    pub fn event_arguments(&self) -> BTreeSet<EventArgumentTuple> {
        self.events
            .iter()
            .flat_map(|ev| {
                ev.arguments.iter().map(move |a| EventArgumentTuple {
                    event_type: ev.event_type.clone(),
                    role: a.role.clone(),
                    filler: a.filler.clone(),
                })
            })
            .collect()
    }
}

pub(crate) fn none_if_empty(s: String) -> String {
    if s.is_empty() {
        NONE.to_owned()
    } else {
        s
    }
}

/// Output sentinel for inputs without any matching structure.
pub const NONE: &str = "None";

pub(crate) fn event_target(
    instance: &Instance,
    event: Option<usize>,
) -> Result<&crate::instance::EventMention> {
    let index = event.ok_or_else(|| Error::IncompatibleTask {
        task: TaskKind::Eea.to_string(),
        dataset: instance.dataset.clone(),
        reason: "EEA needs the index of the event it asks about".into(),
    })?;
    instance.events.get(index).ok_or_else(|| Error::IncompatibleTask {
        task: TaskKind::Eea.to_string(),
        dataset: instance.dataset.clone(),
        reason: format!("instance `{}` has no event #{index}", instance.id),
    })
}
