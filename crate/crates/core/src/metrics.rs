//! Strict micro-averaged precision, recall and F1.
//!
//! Matching is exact on whole tuples with set semantics: a prediction counts
//! only when every component (label and surface, or relation and both
//! arguments, ...) equals a gold tuple.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::ops::AddAssign;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::outparse::Prediction;
use crate::task::TaskKind;
use crate::taskgen::delimiter_hazards;
use crate::tuples::Extraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `(type, surface)`.
    Ner,
    /// `(relation, head, tail)`.
    Re,
    /// `(event type, trigger)`.
    EeTrigger,
    /// `(event type, role, filler)`, pooled over an instance's events.
    EeArgument,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Ner, Metric::Re, Metric::EeTrigger, Metric::EeArgument];

    /// The task whose predictions this metric reads.
    pub fn task(self) -> TaskKind {
        match self {
            Metric::Ner => TaskKind::Ner,
            Metric::Re => TaskKind::Re,
            Metric::EeTrigger | Metric::EeArgument => TaskKind::Ee,
        }
    }

    pub fn for_task(task: TaskKind) -> Vec<Metric> {
        match task {
            TaskKind::Ner => vec![Metric::Ner],
            TaskKind::Re => vec![Metric::Re],
            TaskKind::Ee => vec![Metric::EeTrigger, Metric::EeArgument],
            _ => Vec::new(),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Metric::Ner => "ner",
            Metric::Re => "re",
            Metric::EeTrigger => "ee_trigger",
            Metric::EeArgument => "ee_argument",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Alignment(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    /// Set comparison of one instance's gold and predicted tuples.
    pub fn compare<T: Ord>(gold: &BTreeSet<T>, pred: &BTreeSet<T>) -> Self {
        let tp = gold.intersection(pred).count();
        Self { tp, fp: pred.len() - tp, fn_: gold.len() - tp }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts plus derived precision, recall and F1; every 0/0 is defined as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Score {
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<Counts> for Score {
    fn from(counts: Counts) -> Self {
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall = ratio(counts.tp, counts.tp + counts.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { counts, precision, recall, f1 }
    }
}

/// A parsed prediction tied back to its gold instance.
///
/// `source_id` names the gold instance; when absent, `id` is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    pub dataset: String,
    #[serde(flatten)]
    pub prediction: Prediction,
}

impl PredictionRecord {
    pub fn gold_id(&self) -> &str {
        self.source_id.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Skip gold instances whose serialization is delimiter-ambiguous.
    pub exclude_ambiguous: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalDiagnostics {
    pub instances: usize,
    pub malformed_segments: usize,
    pub unknown_labels: usize,
    pub duplicates_dropped: usize,
    pub ambiguous_excluded: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ambiguous_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub per_dataset: BTreeMap<String, Score>,
    pub aggregate: Score,
    pub diagnostics: EvalDiagnostics,
}

impl EvalReport {
    /// Aligned plain-text table, one row per dataset plus the aggregate.
    pub fn to_table(&self) -> String {
        let width = self
            .per_dataset
            .keys()
            .map(|k| k.chars().count())
            .chain([9])
            .max()
            .unwrap_or(9);
        let mut out = String::new();
        let _ = writeln!(out, "metric: {}", self.metric);
        let _ = writeln!(
            out,
            "{:<width$}  {:>7} {:>7} {:>7}  {:>9} {:>9} {:>9}",
            "dataset", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        let row = |out: &mut String, name: &str, s: &Score| {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7} {:>7} {:>7}  {:>9.4} {:>9.4} {:>9.4}",
                name, s.counts.tp, s.counts.fp, s.counts.fn_, s.precision, s.recall, s.f1
            );
        };
        for (name, score) in &self.per_dataset {
            row(&mut out, name, score);
        }
        row(&mut out, "aggregate", &self.aggregate);
        let d = &self.diagnostics;
        let _ = writeln!(
            out,
            "instances: {}  malformed segments: {}  unknown labels: {}  duplicates dropped: {}  ambiguous excluded: {}",
            d.instances, d.malformed_segments, d.unknown_labels, d.duplicates_dropped, d.ambiguous_excluded
        );
        out
    }
}

fn metric_counts(metric: Metric, gold: &Extraction, pred: &Extraction) -> Counts {
    match metric {
        Metric::Ner => Counts::compare(&gold.entities, &pred.entities),
        Metric::Re => Counts::compare(&gold.relations, &pred.relations),
        Metric::EeTrigger => Counts::compare(&gold.event_triggers(), &pred.event_triggers()),
        Metric::EeArgument => Counts::compare(&gold.event_arguments(), &pred.event_arguments()),
    }
}

fn orphan_list(kind: &str, ids: &[String]) -> String {
    const SHOWN: usize = 20;
    let mut s = format!("{} {kind} without a counterpart: {}", ids.len(), ids[..ids.len().min(SHOWN)].join(", "));
    if ids.len() > SHOWN {
        s.push_str(&format!(", ... and {} more", ids.len() - SHOWN));
    }
    s
}

/// Scores predictions for `metric` against gold instances.
///
/// Only prediction records of the metric's task are read. Golds and
/// predictions are aligned on `(dataset, id)`; any unmatched record on
/// either side is an error.
pub fn score(
    metric: Metric,
    golds: &[Instance],
    preds: &[PredictionRecord],
    options: ScoreOptions,
) -> Result<EvalReport> {
    let task = metric.task();
    let mut by_key: HashMap<(&str, &str), &Prediction> = HashMap::new();
    for record in preds.iter().filter(|r| r.prediction.task == task) {
        if by_key.insert((&record.dataset, record.gold_id()), &record.prediction).is_some() {
            return Err(Error::Alignment(format!(
                "duplicate prediction for `{}` in dataset `{}`",
                record.gold_id(),
                record.dataset
            )));
        }
    }
    let missing: Vec<String> = golds
        .iter()
        .filter(|g| !by_key.contains_key(&(g.dataset.as_str(), g.id.as_str())))
        .map(|g| format!("{}/{}", g.dataset, g.id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Alignment(orphan_list("gold instance(s)", &missing)));
    }
    if by_key.len() != golds.len() {
        let gold_keys: BTreeSet<(&str, &str)> = golds.iter().map(|g| (g.dataset.as_str(), g.id.as_str())).collect();
        let mut extra: Vec<String> = by_key
            .keys()
            .filter(|k| !gold_keys.contains(*k))
            .map(|(d, i)| format!("{d}/{i}"))
            .collect();
        extra.sort();
        if !extra.is_empty() {
            return Err(Error::Alignment(orphan_list("prediction(s)", &extra)));
        }
        return Err(Error::Alignment("duplicate gold instance ids".into()));
    }

    let mut per_dataset: BTreeMap<String, Counts> = BTreeMap::new();
    let mut total = Counts::default();
    let mut diagnostics = EvalDiagnostics::default();
    for gold in golds {
        if options.exclude_ambiguous && !delimiter_hazards(gold, task, None).is_empty() {
            diagnostics.ambiguous_excluded += 1;
            diagnostics.ambiguous_ids.push(format!("{}/{}", gold.dataset, gold.id));
            continue;
        }
        let pred = by_key[&(gold.dataset.as_str(), gold.id.as_str())];
        let gold_tuples = Extraction::gold(gold, task, None)?;
        let counts = metric_counts(metric, &gold_tuples, &pred.extraction);
        *per_dataset.entry(gold.dataset.clone()).or_default() += counts;
        total += counts;
        diagnostics.instances += 1;
        diagnostics.malformed_segments += pred.diagnostics.malformed_segments;
        diagnostics.unknown_labels += pred.diagnostics.unknown_labels.len();
        diagnostics.duplicates_dropped += pred.diagnostics.duplicates_dropped;
    }
    Ok(EvalReport {
        metric,
        per_dataset: per_dataset.into_iter().map(|(k, c)| (k, c.into())).collect(),
        aggregate: total.into(),
        diagnostics,
    })
}

pub fn score_ner(golds: &[Instance], preds: &[PredictionRecord], options: ScoreOptions) -> Result<EvalReport> {
    score(Metric::Ner, golds, preds, options)
}

pub fn score_re(golds: &[Instance], preds: &[PredictionRecord], options: ScoreOptions) -> Result<EvalReport> {
    score(Metric::Re, golds, preds, options)
}

pub fn score_ee_trigger(golds: &[Instance], preds: &[PredictionRecord], options: ScoreOptions) -> Result<EvalReport> {
    score(Metric::EeTrigger, golds, preds, options)
}

pub fn score_ee_argument(golds: &[Instance], preds: &[PredictionRecord], options: ScoreOptions) -> Result<EvalReport> {
    score(Metric::EeArgument, golds, preds, options)
}
