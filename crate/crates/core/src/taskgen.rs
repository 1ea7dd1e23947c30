//! Compiling instances into four-part prompt records
//! (instruction, options, text, gold output).

use std::collections::BTreeSet;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::schema::LabelSchema;
use crate::task::TaskKind;
use crate::tuples::{event_target, none_if_empty, NONE};

/// Instruction templates per task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstructionBank {
    templates: IndexMap<TaskKind, Vec<String>>,
}

const NER_FORMAT: &str = "Output format is \"type1: word1; type2: word2\".";
const RE_FORMAT: &str = "\"relation1: word1, word2; relation2: word3, word4\".";

impl Default for InstructionBank {
    /// The built-in bank: three NER, three RE and two EE templates plus one
    /// per auxiliary task.
    fn default() -> Self {
        let bank = [
            (
                TaskKind::Ner,
                vec![
                    format!("Please list all entity words in the text that fit the category. {NER_FORMAT}"),
                    format!("Please find all the entity words associated with the category in the given text. {NER_FORMAT}"),
                    format!("Please tell me all the entity words in the text that belong to a given category. {NER_FORMAT}"),
                ],
            ),
            (
                TaskKind::Re,
                vec![
                    format!("Given a phrase that describes the relationship between two words, extract the words and the lexical relationship between them. The output format should be {RE_FORMAT}"),
                    format!("Find the phrases in the following sentences that have a given relationship. The output format is {RE_FORMAT}"),
                    format!("Given a sentence, please extract the subject and object containing a certain relation in the sentence according to the following relation types, in the format of {RE_FORMAT}"),
                ],
            ),
            (
                TaskKind::Ee,
                vec![
                    "Locate the role in the text that participated in the event based on the event type and return it in the event list.".to_owned(),
                    "Extract the event information in the text and return them in the event list.".to_owned(),
                ],
            ),
            (
                TaskKind::Es,
                vec!["Please list all entity words in the text that fit the category. Output format is word1, word2.".to_owned()],
            ),
            (
                TaskKind::Et,
                vec![format!("Given options, please tell me the categories of all the listed entity words.{NER_FORMAT}")],
            ),
            (
                TaskKind::Ep,
                vec!["Please list all entity pairs containing a certain relationship in the given options.Output format is \"word1, word2; word3, word4\".".to_owned()],
            ),
            (
                TaskKind::Epr,
                vec![format!("Given options, please tell me the relationships of all the listed entity pairs.Output format is {RE_FORMAT}")],
            ),
            (
                TaskKind::Eet,
                vec!["Please tell me event type and its trigger word from given type options. Output format is \"event type: trigger\".".to_owned()],
            ),
            (
                TaskKind::Eea,
                vec!["Given event type and trigger, please tell me the arguments of all the listed option. Output format is \"name: role\".".to_owned()],
            ),
        ];
        Self { templates: bank.into_iter().collect() }
    }
}

impl InstructionBank {
    /// A bank with no templates at all.
    pub fn empty() -> Self {
        Self { templates: IndexMap::new() }
    }

    /// Loads extra templates from JSON (`{"NER": ["..."], ...}`) and appends
    /// them after the built-in ones.
    pub fn with_extra_json(json: &str) -> Result<Self> {
        let extra: IndexMap<TaskKind, Vec<String>> = serde_json::from_str(json)?;
        let mut bank = Self::default();
        for (task, templates) in extra {
            bank.extend(task, templates);
        }
        Ok(bank)
    }

    pub fn extend(&mut self, task: TaskKind, templates: impl IntoIterator<Item = String>) {
        let list = self.templates.entry(task).or_default();
        for t in templates {
            if !list.contains(&t) {
                list.push(t);
            }
        }
    }

    pub fn templates(&self, task: TaskKind) -> &[String] {
        self.templates.get(&task).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, task: TaskKind, instruction: &str) -> bool {
        self.templates(task).iter().any(|t| t == instruction)
    }

    /// Deterministic template choice: SHA-256 over the little-endian seed and
    /// the instance id, first eight bytes as a big-endian integer, modulo the
    /// number of templates.
    pub fn select(&self, task: TaskKind, instance_id: &str, seed: u64) -> Result<&str> {
        let templates = self.templates(task);
        if templates.is_empty() {
            return Err(Error::MissingTemplate(task.to_string()));
        }
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(instance_id.as_bytes());
        let digest = hasher.finalize();
        let mut prefix = [0u8; 8];
        prefix.copy_from_slice(&digest[..8]);
        let index = (u64::from_be_bytes(prefix) % templates.len() as u64) as usize;
        Ok(&templates[index])
    }
}

/// One compiled training/evaluation record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub id: String,
    pub source_id: String,
    pub dataset: String,
    pub task: TaskKind,
    pub instruction: String,
    pub options: String,
    pub text: String,
    pub gold_output: String,
}

fn join_or_none<I: IntoIterator<Item = String>>(segments: I) -> String {
    none_if_empty(segments.into_iter().collect::<Vec<_>>().join("; "))
}

/// `label: surface` per entity, in annotation order.
pub fn serialize_ner(instance: &Instance) -> String {
    join_or_none(instance.entities.iter().map(|e| format!("{}: {}", e.label, e.span.surface)))
}

/// `relation: head, tail` per triple.
pub fn serialize_re(instance: &Instance) -> String {
    join_or_none(
        instance
            .relations
            .iter()
            .map(|r| format!("{}: {}, {}", r.relation, r.head.surface, r.tail.surface)),
    )
}

/// `type: trigger, role: filler, ...` per event.
pub fn serialize_ee(instance: &Instance) -> String {
    join_or_none(instance.events.iter().map(|ev| {
        let mut s = format!("{}: {}", ev.event_type, ev.trigger.surface);
        for arg in &ev.arguments {
            s.push_str(&format!(", {}: {}", arg.role, arg.filler.surface));
        }
        s
    }))
}

/// Gold output for an auxiliary task. `event` picks the event for EEA.
pub fn serialize_aux(instance: &Instance, task: TaskKind, event: Option<usize>) -> Result<String> {
    let incompatible = || Error::IncompatibleTask {
        task: task.to_string(),
        dataset: instance.dataset.clone(),
        reason: "not an auxiliary task".into(),
    };
    Ok(match task {
        TaskKind::Es => join_unique(instance.entities.iter().map(|e| e.span.surface.clone()), ", "),
        TaskKind::Et => serialize_ner(instance),
        TaskKind::Ep => join_unique(
            instance.relations.iter().map(|r| format!("{}, {}", r.head.surface, r.tail.surface)),
            "; ",
        ),
        TaskKind::Epr => serialize_re(instance),
        TaskKind::Eet => join_unique(
            instance.events.iter().map(|ev| format!("{}: {}", ev.event_type, ev.trigger.surface)),
            "; ",
        ),
        TaskKind::Eea => {
            let ev = event_target(instance, event)?;
            join_or_none(ev.arguments.iter().map(|a| format!("{}: {}", a.filler.surface, a.role)))
        }
        TaskKind::Ner | TaskKind::Re | TaskKind::Ee => return Err(incompatible()),
    })
}

/// Projections can repeat a segment (two relations over one pair); each is
/// emitted once, at its first position.
fn join_unique(segments: impl Iterator<Item = String>, sep: &str) -> String {
    let mut seen = std::collections::HashSet::new();
    let kept: Vec<String> = segments.filter(|s| seen.insert(s.clone())).collect();
    none_if_empty(kept.join(sep))
}

/// Gold output for any task.
pub fn serialize_gold(instance: &Instance, task: TaskKind, event: Option<usize>) -> Result<String> {
    match task {
        TaskKind::Ner => Ok(serialize_ner(instance)),
        TaskKind::Re => Ok(serialize_re(instance)),
        TaskKind::Ee => Ok(serialize_ee(instance)),
        _ => serialize_aux(instance, task, event),
    }
}

/// A surface or label that cannot survive serialization under the
/// escape-free output grammar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelimiterHazard {
    pub field: String,
    pub value: String,
    pub reason: String,
}

struct HazardScan {
    out: Vec<DelimiterHazard>,
}

impl HazardScan {
    fn check(&mut self, field: impl Into<String>, value: &str, forbidden: &[char]) {
        let reason = if value.trim().is_empty() {
            Some("blank after trimming".to_owned())
        } else {
            forbidden
                .iter()
                .find(|c| value.contains(**c))
                .map(|c| format!("contains `{c}`"))
        };
        if let Some(reason) = reason {
            self.out.push(DelimiterHazard { field: field.into(), value: value.to_owned(), reason });
        }
    }
}

const SEG: char = ';';
const PAIR: char = ',';
const KV: char = ':';

/// Lists every surface or label of `instance` that makes the `task`
/// serialization lossy. An empty list means parse(serialize(x)) recovers x.
pub fn delimiter_hazards(instance: &Instance, task: TaskKind, event: Option<usize>) -> Vec<DelimiterHazard> {
    let mut scan = HazardScan { out: Vec::new() };
    match task {
        TaskKind::Ner | TaskKind::Et => {
            for (i, e) in instance.entities.iter().enumerate() {
                scan.check(format!("entities[{i}].label"), &e.label, &[KV, SEG]);
                scan.check(format!("entities[{i}]"), &e.span.surface, &[SEG]);
            }
        }
        TaskKind::Es => {
            for (i, e) in instance.entities.iter().enumerate() {
                scan.check(format!("entities[{i}]"), &e.span.surface, &[PAIR]);
            }
            let distinct: BTreeSet<&str> = instance.entities.iter().map(|e| e.span.surface.trim()).collect();
            if let [only] = distinct.into_iter().collect::<Vec<_>>()[..] {
                if only.eq_ignore_ascii_case(NONE) {
                    scan.out.push(DelimiterHazard {
                        field: "entities".into(),
                        value: only.to_owned(),
                        reason: "sole surface reads as the None sentinel".into(),
                    });
                }
            }
        }
        TaskKind::Re | TaskKind::Epr | TaskKind::Ep => {
            for (i, r) in instance.relations.iter().enumerate() {
                if task != TaskKind::Ep {
                    scan.check(format!("relations[{i}].relation"), &r.relation, &[KV, SEG]);
                }
                scan.check(format!("relations[{i}].head"), &r.head.surface, &[PAIR, SEG]);
                scan.check(format!("relations[{i}].tail"), &r.tail.surface, &[SEG]);
            }
        }
        TaskKind::Ee => {
            for (i, ev) in instance.events.iter().enumerate() {
                scan.check(format!("events[{i}].type"), &ev.event_type, &[KV, PAIR, SEG]);
                scan.check(format!("events[{i}].trigger"), &ev.trigger.surface, &[PAIR, SEG]);
                for (j, a) in ev.arguments.iter().enumerate() {
                    scan.check(format!("events[{i}].arguments[{j}].role"), &a.role, &[KV, PAIR, SEG]);
                    scan.check(format!("events[{i}].arguments[{j}]"), &a.filler.surface, &[PAIR, SEG]);
                }
            }
        }
        TaskKind::Eet => {
            for (i, ev) in instance.events.iter().enumerate() {
                scan.check(format!("events[{i}].type"), &ev.event_type, &[KV, SEG]);
                scan.check(format!("events[{i}].trigger"), &ev.trigger.surface, &[SEG]);
            }
        }
        TaskKind::Eea => {
            if let Ok(ev) = event_target(instance, event) {
                for (j, a) in ev.arguments.iter().enumerate() {
                    scan.check(format!("arguments[{j}]"), &a.filler.surface, &[KV, PAIR, SEG]);
                    scan.check(format!("arguments[{j}].role"), &a.role, &[PAIR, SEG]);
                }
            }
        }
    }
    scan.out
}

/// Whether every task family in `tasks` matches the schema.
fn check_compatible(task: TaskKind, instance: &Instance, schema: &LabelSchema) -> Result<()> {
    let incompatible = |reason: String| Error::IncompatibleTask {
        task: task.to_string(),
        dataset: instance.dataset.clone(),
        reason,
    };
    if instance.dataset != schema.dataset() {
        return Err(incompatible(format!("schema is for dataset `{}`", schema.dataset())));
    }
    if task.family() != schema.task() {
        return Err(incompatible(format!("schema describes a {} dataset", schema.task())));
    }
    Ok(())
}

fn prompt_text(instance: &Instance, task: TaskKind, event: Option<usize>) -> Result<String> {
    let mut text = instance.text.clone();
    match task {
        TaskKind::Et => {
            let mut seen = BTreeSet::new();
            let surfaces: Vec<&str> = instance
                .entities
                .iter()
                .map(|e| e.span.surface.as_str())
                .filter(|s| seen.insert(*s))
                .collect();
            text.push_str(&format!("\nEntities: {}", surfaces.join(", ")));
        }
        TaskKind::Epr => {
            let pairs: Vec<String> = instance
                .relations
                .iter()
                .map(|r| format!("{}, {}", r.head.surface, r.tail.surface))
                .collect();
            text.push_str(&format!("\nEntity pairs: {}", pairs.join("; ")));
        }
        TaskKind::Eea => {
            let ev = event_target(instance, event)?;
            text.push_str(&format!("\nEvent: {}, {}", ev.event_type, ev.trigger.surface));
        }
        _ => {}
    }
    Ok(text)
}

fn options_for(task: TaskKind, schema: &LabelSchema) -> Result<String> {
    match task {
        TaskKind::Eet => schema.render_event_type_options(),
        TaskKind::Eea => schema.render_role_options(),
        _ => schema.render_options(),
    }
}

/// Builds one prompt record. `event` is the event index for EEA and ignored
/// otherwise.
pub fn build_prompt(
    instance: &Instance,
    task: TaskKind,
    event: Option<usize>,
    schema: &LabelSchema,
    bank: &InstructionBank,
    seed: u64,
) -> Result<PromptInstance> {
    check_compatible(task, instance, schema)?;
    let instruction = bank.select(task, &instance.id, seed)?.to_owned();
    let event = if task == TaskKind::Eea { event } else { None };
    let id = match event {
        Some(i) => format!("{}#{}.{}", instance.id, task, i),
        None => format!("{}#{}", instance.id, task),
    };
    Ok(PromptInstance {
        id,
        source_id: instance.id.clone(),
        dataset: instance.dataset.clone(),
        task,
        instruction,
        options: options_for(task, schema)?,
        text: prompt_text(instance, task, event)?,
        gold_output: serialize_gold(instance, task, event)?,
    })
}

/// A compiled prompt whose gold output is lossy under the output grammar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguityFlag {
    pub prompt_id: String,
    pub hazards: Vec<DelimiterHazard>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompiledCorpus {
    pub prompts: Vec<PromptInstance>,
    pub ambiguous: Vec<AmbiguityFlag>,
}

/// The (task, event) units an instance expands to. EEA yields one unit per
/// event; every other task yields one.
pub fn compile_units(instance: &Instance, tasks: &BTreeSet<TaskKind>) -> Vec<(TaskKind, Option<usize>)> {
    let mut units = Vec::new();
    for &task in tasks {
        if task == TaskKind::Eea {
            units.extend((0..instance.events.len()).map(|i| (task, Some(i))));
        } else {
            units.push((task, None));
        }
    }
    units
}

/// Compiles every instance for every requested task. Output order is
/// instance order, then task order, then event order, whatever the thread
/// schedule.
pub fn compile_dataset(
    instances: &[Instance],
    tasks: &BTreeSet<TaskKind>,
    schema: &LabelSchema,
    bank: &InstructionBank,
    seed: u64,
) -> Result<CompiledCorpus> {
    for &task in tasks {
        if task.family() != schema.task() {
            return Err(Error::IncompatibleTask {
                task: task.to_string(),
                dataset: schema.dataset().to_owned(),
                reason: format!("schema describes a {} dataset", schema.task()),
            });
        }
    }
    let per_instance: Vec<Vec<(PromptInstance, Vec<DelimiterHazard>)>> = instances
        .par_iter()
        .map(|instance| {
            compile_units(instance, tasks)
                .into_iter()
                .map(|(task, event)| {
                    let prompt = build_prompt(instance, task, event, schema, bank, seed)?;
                    Ok((prompt, delimiter_hazards(instance, task, event)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut corpus = CompiledCorpus::default();
    for (prompt, hazards) in per_instance.into_iter().flatten() {
        if !hazards.is_empty() {
            corpus.ambiguous.push(AmbiguityFlag { prompt_id: prompt.id.clone(), hazards });
        }
        corpus.prompts.push(prompt);
    }
    Ok(corpus)
}
