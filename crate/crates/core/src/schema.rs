//! Per-dataset label inventories, label naturalization and cross-dataset
//! synonym unification.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three annotation families a dataset can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskFamily {
    #[serde(rename = "NER")]
    Ner,
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "EE")]
    Ee,
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskFamily::Ner => "NER",
            TaskFamily::Re => "RE",
            TaskFamily::Ee => "EE",
        })
    }
}

impl FromStr for TaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NER" => Ok(TaskFamily::Ner),
            "RE" => Ok(TaskFamily::Re),
            "EE" => Ok(TaskFamily::Ee),
            other => Err(Error::IncompatibleTask {
                task: other.to_owned(),
                dataset: String::new(),
                reason: "expected one of NER, RE, EE".into(),
            }),
        }
    }
}

/// Characters that canonical labels may not contain: `_` by convention, the
/// rest because they delimit the output grammar.
const FORBIDDEN_LABEL_CHARS: [char; 4] = ['_', ':', ';', ','];

/// Case- and whitespace-insensitive lookup key for labels.
pub fn label_key(label: &str) -> String {
    label
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Turns a raw dataset label into its natural-language form.
///
/// An entry in `overrides` wins verbatim. Otherwise: keep only the last
/// `/`-separated segment, turn `_` and `-` into spaces, collapse whitespace
/// and lowercase.
pub fn naturalize_label(raw: &str, overrides: &HashMap<String, String>) -> Result<String> {
    if raw.trim().is_empty() {
        return Err(Error::EmptyLabel);
    }
    if let Some(natural) = overrides.get(raw) {
        return Ok(natural.clone());
    }
    let segment = raw
        .rsplit('/')
        .map(str::trim)
        .find(|s| !s.is_empty())
        .ok_or(Error::EmptyLabel)?;
    let spaced: String = segment
        .chars()
        .map(|c| if c == '_' || c == '-' { ' ' } else { c })
        .collect();
    let natural = label_key(&spaced);
    if natural.is_empty() {
        return Err(Error::EmptyLabel);
    }
    Ok(natural)
}

/// Canonical label inventory of one dataset.
///
/// Immutable once built; all constructors validate the canonical-label rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct LabelSchema {
    dataset: String,
    task: TaskFamily,
    labels: Vec<String>,
    event_types: Vec<String>,
    roles: Vec<String>,
    raw_to_canonical: IndexMap<String, String>,
    label_index: HashMap<String, usize>,
    event_type_index: HashMap<String, usize>,
    role_index: HashMap<String, usize>,
}

/// On-disk schema layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub dataset: String,
    pub task: TaskFamily,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub event_types: Vec<String>,
    #[serde(default)]
    pub roles: Vec<String>,
    #[serde(default)]
    pub raw_to_canonical: IndexMap<String, String>,
}

impl TryFrom<SchemaFile> for LabelSchema {
    type Error = Error;

    fn try_from(file: SchemaFile) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidSchema {
            dataset: file.dataset.clone(),
            reason,
        };
        match file.task {
            TaskFamily::Ee if !file.labels.is_empty() => {
                return Err(invalid(
                    "event schemas use `event_types` and `roles`, not `labels`".into(),
                ))
            }
            TaskFamily::Ner | TaskFamily::Re
                if !file.event_types.is_empty() || !file.roles.is_empty() =>
            {
                return Err(invalid(format!(
                    "{} schemas cannot declare event types or roles",
                    file.task
                )))
            }
            _ => {}
        }
        let label_index = index_labels(&file.labels).map_err(invalid)?;
        let event_type_index = index_labels(&file.event_types).map_err(invalid)?;
        let role_index = index_labels(&file.roles).map_err(invalid)?;
        for (raw, canonical) in &file.raw_to_canonical {
            if raw.is_empty() {
                return Err(invalid("empty raw label in raw_to_canonical".into()));
            }
            let known = label_index.contains_key(canonical)
                || event_type_index.contains_key(canonical)
                || role_index.contains_key(canonical);
            if !known {
                return Err(invalid(format!(
                    "raw label `{raw}` maps to `{canonical}`, which is not a canonical label"
                )));
            }
        }
        Ok(Self {
            dataset: file.dataset,
            task: file.task,
            labels: file.labels,
            event_types: file.event_types,
            roles: file.roles,
            raw_to_canonical: file.raw_to_canonical,
            label_index,
            event_type_index,
            role_index,
        })
    }
}

impl From<LabelSchema> for SchemaFile {
    fn from(schema: LabelSchema) -> Self {
        Self {
            dataset: schema.dataset,
            task: schema.task,
            labels: schema.labels,
            event_types: schema.event_types,
            roles: schema.roles,
            raw_to_canonical: schema.raw_to_canonical,
        }
    }
}

fn index_labels(labels: &[String]) -> std::result::Result<HashMap<String, usize>, String> {
    let mut index = HashMap::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        check_canonical(label)?;
        if index.insert(label.clone(), i).is_some() {
            return Err(format!("duplicate canonical label `{label}`"));
        }
    }
    Ok(index)
}

fn check_canonical(label: &str) -> std::result::Result<(), String> {
    if label.is_empty() {
        return Err("empty canonical label".into());
    }
    if let Some(c) = label.chars().find(|c| FORBIDDEN_LABEL_CHARS.contains(c)) {
        return Err(format!("canonical label `{label}` contains `{c}`"));
    }
    if label_key(label) != label {
        return Err(format!(
            "canonical label `{label}` must be lowercase with single inner spaces"
        ));
    }
    Ok(())
}

impl LabelSchema {
    /// Schema for an NER or RE dataset.
    pub fn new(
        dataset: impl Into<String>,
        task: TaskFamily,
        labels: Vec<String>,
        raw_to_canonical: IndexMap<String, String>,
    ) -> Result<Self> {
        SchemaFile {
            dataset: dataset.into(),
            task,
            labels,
            event_types: Vec::new(),
            roles: Vec::new(),
            raw_to_canonical,
        }
        .try_into()
    }

    pub fn events(
        dataset: impl Into<String>,
        event_types: Vec<String>,
        roles: Vec<String>,
        raw_to_canonical: IndexMap<String, String>,
    ) -> Result<Self> {
        SchemaFile {
            dataset: dataset.into(),
            task: TaskFamily::Ee,
            labels: Vec::new(),
            event_types,
            roles,
            raw_to_canonical,
        }
        .try_into()
    }

    /// Builds a schema from raw labels observed in a corpus, naturalizing each
    /// one. Canonical labels keep first-seen order.
    pub fn from_raw_labels<'a>(
        dataset: impl Into<String>,
        task: TaskFamily,
        raw: impl IntoIterator<Item = &'a str>,
        overrides: &HashMap<String, String>,
    ) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut map = IndexMap::new();
        for raw in raw {
            if map.contains_key(raw) {
                continue;
            }
            let natural = naturalize_label(raw, overrides)?;
            if !labels.contains(&natural) {
                labels.push(natural.clone());
            }
            map.insert(raw.to_owned(), natural);
        }
        Self::new(dataset, task, labels, map)
    }

    /// Event counterpart of [`LabelSchema::from_raw_labels`].
    pub fn from_raw_events<'a>(
        dataset: impl Into<String>,
        raw_types: impl IntoIterator<Item = &'a str>,
        raw_roles: impl IntoIterator<Item = &'a str>,
        overrides: &HashMap<String, String>,
    ) -> Result<Self> {
        let mut map = IndexMap::new();
        let mut collect = |raws: &mut dyn Iterator<Item = &'a str>| -> Result<Vec<String>> {
            let mut out: Vec<String> = Vec::new();
            for raw in raws {
                let natural = naturalize_label(raw, overrides)?;
                if !out.contains(&natural) {
                    out.push(natural.clone());
                }
                map.insert(raw.to_owned(), natural);
            }
            Ok(out)
        };
        let event_types = collect(&mut raw_types.into_iter())?;
        let roles = collect(&mut raw_roles.into_iter())?;
        Self::events(dataset, event_types, roles, map)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn dataset(&self) -> &str {
        &self.dataset
    }

    pub fn task(&self) -> TaskFamily {
        self.task
    }

    /// Entity types (NER) or relation types (RE).
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn event_types(&self) -> &[String] {
        &self.event_types
    }

    pub fn roles(&self) -> &[String] {
        &self.roles
    }

    pub fn raw_to_canonical(&self) -> &IndexMap<String, String> {
        &self.raw_to_canonical
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.label_index.contains_key(label)
    }

    pub fn has_event_type(&self, label: &str) -> bool {
        self.event_type_index.contains_key(label)
    }

    pub fn has_role(&self, label: &str) -> bool {
        self.role_index.contains_key(label)
    }

    /// Maps a raw dataset label to its canonical entity/relation label.
    /// Canonical labels map to themselves.
    pub fn canonical_label(&self, raw: &str) -> Option<&str> {
        resolve(raw, &self.raw_to_canonical, &self.labels, &self.label_index)
    }

    pub fn canonical_event_type(&self, raw: &str) -> Option<&str> {
        resolve(
            raw,
            &self.raw_to_canonical,
            &self.event_types,
            &self.event_type_index,
        )
    }

    pub fn canonical_role(&self, raw: &str) -> Option<&str> {
        resolve(raw, &self.raw_to_canonical, &self.roles, &self.role_index)
    }

    /// Matches generated label text case-insensitively against the canonical labels.
    pub fn match_label(&self, generated: &str) -> Option<&str> {
        lookup(generated, &self.labels, &self.label_index)
    }

    pub fn match_event_type(&self, generated: &str) -> Option<&str> {
        lookup(generated, &self.event_types, &self.event_type_index)
    }

    pub fn match_role(&self, generated: &str) -> Option<&str> {
        lookup(generated, &self.roles, &self.role_index)
    }

    /// The `Option:` block shown to the model. Event schemas render two lines:
    /// event types, then argument roles.
    pub fn render_options(&self) -> Result<String> {
        match self.task {
            TaskFamily::Ner | TaskFamily::Re => option_line(&self.labels),
            TaskFamily::Ee => {
                let types = option_line(&self.event_types)?;
                if self.roles.is_empty() {
                    Ok(types)
                } else {
                    Ok(format!("{types}\n{}", option_line(&self.roles)?))
                }
            }
        }
    }

    pub fn render_event_type_options(&self) -> Result<String> {
        option_line(&self.event_types)
    }

    pub fn render_role_options(&self) -> Result<String> {
        option_line(&self.roles)
    }
}

fn resolve<'a>(
    raw: &str,
    mapping: &'a IndexMap<String, String>,
    labels: &'a [String],
    index: &HashMap<String, usize>,
) -> Option<&'a str> {
    if let Some(canonical) = mapping.get(raw) {
        return index.get(canonical.as_str()).map(|&i| labels[i].as_str());
    }
    index.get(raw).map(|&i| labels[i].as_str())
}

fn lookup<'a>(generated: &str, labels: &'a [String], index: &HashMap<String, usize>) -> Option<&'a str> {
    if let Some(&i) = index.get(generated) {
        return Some(labels[i].as_str());
    }
    index.get(&label_key(generated)).map(|&i| labels[i].as_str())
}

/// Renders one `Option:` line.
pub fn option_line(labels: &[String]) -> Result<String> {
    if labels.is_empty() {
        return Err(Error::EmptyOptions);
    }
    Ok(format!("Option: {}", labels.join(", ")))
}

/// A set of raw labels that share one meaning, plus the canonical name they
/// all map to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasGroup {
    pub canonical: String,
    pub aliases: Vec<String>,
}

impl AliasGroup {
    pub fn new<S: Into<String>>(canonical: impl Into<String>, aliases: impl IntoIterator<Item = S>) -> Self {
        Self {
            canonical: canonical.into(),
            aliases: aliases.into_iter().map(Into::into).collect(),
        }
    }

    fn matches_raw(&self, raw: &str) -> bool {
        raw == self.canonical || self.aliases.iter().any(|a| a == raw)
    }

    fn matches_canonical(&self, canonical: &str) -> bool {
        canonical == self.canonical || self.aliases.iter().any(|a| label_key(a) == canonical)
    }
}

/// Reads an alias configuration file: a JSON array of `{"canonical", "aliases"}`.
pub fn load_alias_groups(json: &str) -> Result<Vec<AliasGroup>> {
    Ok(serde_json::from_str(json)?)
}

/// Rewrites every schema so that all members of an alias group map to the
/// group's canonical name. Applying the same groups twice is a no-op.
pub fn unify_labels(schemas: &[LabelSchema], groups: &[AliasGroup]) -> Result<Vec<LabelSchema>> {
    check_alias_groups(schemas, groups)?;
    schemas.iter().map(|s| unify_one(s, groups)).collect()
}

fn check_alias_groups(schemas: &[LabelSchema], groups: &[AliasGroup]) -> Result<()> {
    let mut owner: HashMap<String, &str> = HashMap::new();
    for group in groups {
        check_canonical(&group.canonical).map_err(Error::AliasConfig)?;
        for alias in group.aliases.iter().map(String::as_str).chain([group.canonical.as_str()]) {
            match owner.insert(label_key(alias), &group.canonical) {
                Some(previous) if previous != group.canonical => {
                    return Err(Error::AliasConfig(format!(
                        "`{alias}` is assigned to both `{previous}` and `{}`",
                        group.canonical
                    )))
                }
                _ => {}
            }
        }
        let used = schemas.iter().any(|schema| {
            schema.raw_to_canonical.keys().any(|raw| group.matches_raw(raw))
                || all_canonical(schema).any(|label| group.matches_canonical(label))
        });
        if !used {
            return Err(Error::AliasConfig(format!(
                "alias group `{}` matches no label in any schema",
                group.canonical
            )));
        }
    }
    Ok(())
}

fn all_canonical(schema: &LabelSchema) -> impl Iterator<Item = &str> {
    schema
        .labels
        .iter()
        .chain(&schema.event_types)
        .chain(&schema.roles)
        .map(String::as_str)
}

fn unify_one(schema: &LabelSchema, groups: &[AliasGroup]) -> Result<LabelSchema> {
    let rename = |label: &str| -> String {
        groups
            .iter()
            .find(|g| g.matches_canonical(label))
            .map_or_else(|| label.to_owned(), |g| g.canonical.clone())
    };
    let mut labels = remap_set(&schema.labels, &rename);
    let mut event_types = remap_set(&schema.event_types, &rename);
    let mut roles = remap_set(&schema.roles, &rename);

    let mut raw_to_canonical = IndexMap::with_capacity(schema.raw_to_canonical.len());
    for (raw, canonical) in &schema.raw_to_canonical {
        let target = match groups.iter().find(|g| g.matches_raw(raw)) {
            Some(group) => group.canonical.clone(),
            None => rename(canonical),
        };
        // A raw alias can pull in a name its current label set does not have yet.
        let set = if schema.label_index.contains_key(canonical) {
            &mut labels
        } else if schema.event_type_index.contains_key(canonical) {
            &mut event_types
        } else {
            &mut roles
        };
        if !set.contains(&target) {
            set.push(target.clone());
        }
        raw_to_canonical.insert(raw.clone(), target);
    }

    SchemaFile {
        dataset: schema.dataset.clone(),
        task: schema.task,
        labels,
        event_types,
        roles,
        raw_to_canonical,
    }
    .try_into()
}

fn remap_set(labels: &[String], rename: &impl Fn(&str) -> String) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(labels.len());
    for label in labels {
        let renamed = rename(label);
        if !out.contains(&renamed) {
            out.push(renamed);
        }
    }
    out
}
