//! Brute-force scoring over plain string tuples, sharing nothing with the
//! library's tuple types beyond the final conversion.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use uniex::instance::{Argument, EntityMention, EventMention, RelationMention, Span};
use uniex::metrics::{score, Counts, Metric, PredictionRecord, ScoreOptions};
use uniex::outparse::ParseDiagnostics;
use uniex::tuples::{ArgumentTuple, EntityTuple, EventTuple, RelationTuple};
use uniex::{Extraction, Instance, Prediction};

const LABELS: &[&str] = &["alpha", "beta", "gamma"];
const SURFACES: &[&str] = &["x", "y", "z", "x y", " y", "z "];

type Tuple = Vec<String>;

fn span(s: &str) -> Span {
    Span { start: 0, end: s.chars().count(), surface: s.to_owned() }
}

fn pick(rng: &mut ChaCha8Rng, from: &[&str]) -> String {
    (*from.choose(rng).unwrap()).to_owned()
}

/// Distinct-tuple counts by linear scan.
pub fn brute_counts(gold: &[Tuple], pred: &[Tuple]) -> (usize, usize, usize) {
    let mut g: Vec<&Tuple> = Vec::new();
    for t in gold {
        if !g.contains(&t) {
            g.push(t);
        }
    }
    let mut p: Vec<&Tuple> = Vec::new();
    for t in pred {
        if !p.contains(&t) {
            p.push(t);
        }
    }
    let tp = p.iter().filter(|t| g.contains(t)).count();
    (tp, p.len() - tp, g.len() - tp)
}

fn gold_tuples(metric: Metric, inst: &Instance) -> Vec<Tuple> {
    let t = |s: &str| s.trim().to_owned();
    match metric {
        Metric::Ner => inst.entities.iter().map(|e| vec![e.label.clone(), t(&e.span.surface)]).collect(),
        Metric::Re => inst
            .relations
            .iter()
            .map(|r| vec![r.relation.clone(), t(&r.head.surface), t(&r.tail.surface)])
            .collect(),
        Metric::EeTrigger => inst.events.iter().map(|e| vec![e.event_type.clone(), t(&e.trigger.surface)]).collect(),
        Metric::EeArgument => inst
            .events
            .iter()
            .flat_map(|e| e.arguments.iter().map(move |a| vec![e.event_type.clone(), a.role.clone(), t(&a.filler.surface)]))
            .collect(),
    }
}

/// Event predictions as (type, trigger, [(role, filler)]).
type PredEvent = (String, String, Vec<(String, String)>);

fn pred_tuples(metric: Metric, events: &[PredEvent], flat: &[Tuple]) -> Vec<Tuple> {
    match metric {
        Metric::Ner | Metric::Re => flat.to_vec(),
        Metric::EeTrigger => events.iter().map(|(ty, tr, _)| vec![ty.clone(), tr.clone()]).collect(),
        Metric::EeArgument => events
            .iter()
            .flat_map(|(ty, _, args)| args.iter().map(move |(r, f)| vec![ty.clone(), r.clone(), f.clone()]))
            .collect(),
    }
}

fn random_instance(rng: &mut ChaCha8Rng, metric: Metric, i: usize) -> Instance {
    let mut inst = Instance::new(format!("o-{i}"), if i.is_multiple_of(2) { "even" } else { "odd" }, "x y z");
    for _ in 0..rng.random_range(0..4) {
        match metric {
            Metric::Ner => inst.entities.push(EntityMention { span: span(&pick(rng, SURFACES)), label: pick(rng, LABELS) }),
            Metric::Re => inst.relations.push(RelationMention {
                relation: pick(rng, LABELS),
                head: span(&pick(rng, SURFACES)),
                tail: span(&pick(rng, SURFACES)),
            }),
            Metric::EeTrigger | Metric::EeArgument => {
                let arguments = (0..rng.random_range(0..3))
                    .map(|_| Argument { role: pick(rng, LABELS), filler: span(&pick(rng, SURFACES)) })
                    .collect();
                inst.events.push(EventMention { event_type: pick(rng, LABELS), trigger: span(&pick(rng, SURFACES)), arguments });
            }
        }
    }
    inst
}

/// Keeps, drops, relabels and invents predicted tuples around the gold.
fn random_prediction(rng: &mut ChaCha8Rng, metric: Metric, gold: &Instance) -> (Vec<PredEvent>, Vec<Tuple>) {
    let mut flat: Vec<Tuple> = Vec::new();
    let mut events: Vec<PredEvent> = Vec::new();
    let arity = if metric == Metric::Re { 3 } else { 2 };
    for t in gold_tuples(metric, gold).into_iter().filter(|_| metric == Metric::Ner || metric == Metric::Re) {
        match rng.random_range(0..4) {
            0 => {}
            1 => flat.push(vec![pick(rng, LABELS)].into_iter().chain(t[1..].iter().cloned()).collect()),
            _ => flat.push(t),
        }
    }
    if matches!(metric, Metric::EeTrigger | Metric::EeArgument) {
        for e in &gold.events {
            if rng.random_bool(0.25) {
                continue;
            }
            let ty = if rng.random_bool(0.2) { pick(rng, LABELS) } else { e.event_type.clone() };
            let args = e
                .arguments
                .iter()
                .filter(|_| rng.random_bool(0.75))
                .map(|a| (a.role.clone(), a.filler.surface.trim().to_owned()))
                .collect();
            events.push((ty, e.trigger.surface.trim().to_owned(), args));
        }
    }
    for _ in 0..rng.random_range(0..3) {
        match metric {
            Metric::Ner | Metric::Re => {
                let mut t = vec![pick(rng, LABELS)];
                t.extend((1..arity).map(|_| pick(rng, SURFACES).trim().to_owned()));
                flat.push(t);
            }
            _ => {
                let args = (0..rng.random_range(0..3))
                    .map(|_| (pick(rng, LABELS), pick(rng, SURFACES).trim().to_owned()))
                    .collect();
                events.push((pick(rng, LABELS), pick(rng, SURFACES).trim().to_owned(), args));
            }
        }
    }
    (events, flat)
}

fn to_extraction(metric: Metric, events: &[PredEvent], flat: &[Tuple]) -> Extraction {
    let mut e = Extraction::default();
    match metric {
        Metric::Ner => {
            e.entities = flat.iter().map(|t| EntityTuple { label: t[0].clone(), surface: t[1].clone() }).collect()
        }
        Metric::Re => {
            e.relations = flat
                .iter()
                .map(|t| RelationTuple { relation: t[0].clone(), head: t[1].clone(), tail: t[2].clone() })
                .collect()
        }
        Metric::EeTrigger | Metric::EeArgument => {
            e.events = events
                .iter()
                .map(|(ty, tr, args)| EventTuple {
                    event_type: ty.clone(),
                    trigger: tr.clone(),
                    arguments: args.iter().map(|(r, f)| ArgumentTuple { role: r.clone(), filler: f.clone() }).collect(),
                })
                .collect()
        }
    }
    e
}

pub struct OracleRun {
    pub library: Counts,
    pub oracle: (usize, usize, usize),
    pub per_dataset_agree: bool,
}

/// Scores `n` random gold/prediction pairs with the library and the oracle.
pub fn oracle_run(metric: Metric, n: usize, rng: &mut ChaCha8Rng) -> OracleRun {
    let mut golds = Vec::new();
    let mut preds = Vec::new();
    let mut oracle = (0, 0, 0);
    let mut per_ds: std::collections::BTreeMap<String, (usize, usize, usize)> = Default::default();
    for i in 0..n {
        let gold = random_instance(rng, metric, i);
        let (events, flat) = random_prediction(rng, metric, &gold);
        let (tp, fp, fn_) = brute_counts(&gold_tuples(metric, &gold), &pred_tuples(metric, &events, &flat));
        oracle = (oracle.0 + tp, oracle.1 + fp, oracle.2 + fn_);
        let d = per_ds.entry(gold.dataset.clone()).or_default();
        *d = (d.0 + tp, d.1 + fp, d.2 + fn_);
        preds.push(PredictionRecord {
            id: gold.id.clone(),
            source_id: None,
            dataset: gold.dataset.clone(),
            prediction: Prediction {
                task: metric.task(),
                extraction: to_extraction(metric, &events, &flat),
                diagnostics: ParseDiagnostics::default(),
            },
        });
        golds.push(gold);
    }
    let report = score(metric, &golds, &preds, ScoreOptions::default()).unwrap();
    let per_dataset_agree = per_ds.iter().all(|(ds, &(tp, fp, fn_))| {
        let c = report.per_dataset[ds].counts;
        (c.tp, c.fp, c.fn_) == (tp, fp, fn_)
    });
    OracleRun { library: report.aggregate.counts, oracle, per_dataset_agree }
}
