#![allow(dead_code)]
pub mod mock;
pub mod oracle;

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use uniex::ingest::{ingest_json, ingest_token_tagged, TaggingScheme};
use uniex::taskgen::{delimiter_hazards, InstructionBank};
use uniex::{build_prompt, parse, Extraction, Instance, LabelSchema, TaskFamily, TaskKind};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn schema(name: &str) -> LabelSchema {
    LabelSchema::from_json(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

/// The three hand-written fixture datasets, labels already canonical.
pub fn fixture_datasets() -> Vec<(LabelSchema, Vec<Instance>)> {
    let ner = schema("ner.schema.json");
    let conll = BufReader::new(File::open(fixture("conll_ner.txt")).unwrap());
    let ner_report = ingest_token_tagged(conll, TaggingScheme::Bio2, "fixture-ner", Some(&ner)).unwrap();
    assert!(ner_report.diagnostics.is_empty(), "{:?}", ner_report.diagnostics);

    let mut out = vec![(ner, ner_report.instances)];
    for (schema_file, data, family) in [
        ("re.schema.json", "re.jsonl", TaskFamily::Re),
        ("ee.schema.json", "ee.jsonl", TaskFamily::Ee),
    ] {
        let s = schema(schema_file);
        let report = ingest_json(BufReader::new(File::open(fixture(data)).unwrap()), family, Some(&s)).unwrap();
        assert!(report.diagnostics.is_empty(), "{:?}", report.diagnostics);
        out.push((s, report.instances));
    }
    out
}

pub fn all_tasks(family: TaskFamily) -> Vec<TaskKind> {
    std::iter::once(TaskKind::main(family)).chain(TaskKind::auxiliaries(family).iter().copied()).collect()
}

#[derive(Debug, Default)]
pub struct RoundTrip {
    pub instances: usize,
    pub prompts: usize,
    pub ambiguous: Vec<String>,
    pub failures: Vec<String>,
}

/// Serializes every task unit of every instance, parses the gold output back
/// and compares tuple sets. Units with delimiter hazards are listed, not checked.
pub fn round_trip(datasets: &[(LabelSchema, Vec<Instance>)]) -> RoundTrip {
    let bank = InstructionBank::default();
    let mut out = RoundTrip::default();
    for (schema, instances) in datasets {
        let tasks = all_tasks(schema.task());
        for inst in instances {
            out.instances += 1;
            for &task in &tasks {
                let events: Vec<Option<usize>> =
                    if task == TaskKind::Eea { (0..inst.events.len()).map(Some).collect() } else { vec![None] };
                for event in events {
                    let prompt = build_prompt(inst, task, event, schema, &bank, 0).unwrap();
                    out.prompts += 1;
                    if !delimiter_hazards(inst, task, event).is_empty() {
                        out.ambiguous.push(prompt.id);
                        continue;
                    }
                    let parsed = parse(&prompt.gold_output, task, schema);
                    let gold = Extraction::gold(inst, task, event).unwrap();
                    let d = &parsed.diagnostics;
                    if parsed.extraction != gold || d.malformed_segments != 0 || !d.unknown_labels.is_empty() {
                        out.failures.push(format!("{}: {:?}", prompt.id, prompt.gold_output));
                    }
                }
            }
        }
    }
    out
}

/// Uses each prompt's gold output as the model generation.
pub fn gold_as_predictions(
    schema: &LabelSchema,
    instances: &[Instance],
    tasks: &[TaskKind],
) -> Vec<uniex::PredictionRecord> {
    let tasks = tasks.iter().copied().collect();
    let compiled =
        uniex::compile_dataset(instances, &tasks, schema, &InstructionBank::default(), 0).unwrap();
    compiled
        .prompts
        .iter()
        .map(|p| uniex::PredictionRecord {
            id: p.id.clone(),
            source_id: Some(p.source_id.clone()),
            dataset: p.dataset.clone(),
            prediction: parse(&p.gold_output, p.task, schema),
        })
        .collect()
}
