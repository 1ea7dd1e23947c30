use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::schema::TaskFamily;

/// The three extraction tasks and their six auxiliary decompositions.
///
/// Declaration order is the compile order used by
/// [`compile_dataset`](crate::taskgen::compile_dataset).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TaskKind {
    Ner,
    Re,
    Ee,
    /// Entity span extraction.
    Es,
    /// Entity typing.
    Et,
    /// Entity pair extraction.
    Ep,
    /// Entity pair relation classification.
    Epr,
    /// Event trigger extraction.
    Eet,
    /// Event argument extraction, one prompt per event.
    Eea,
}

impl TaskKind {
    pub const ALL: [TaskKind; 9] = [
        TaskKind::Ner,
        TaskKind::Re,
        TaskKind::Ee,
        TaskKind::Es,
        TaskKind::Et,
        TaskKind::Ep,
        TaskKind::Epr,
        TaskKind::Eet,
        TaskKind::Eea,
    ];

    pub fn family(self) -> TaskFamily {
        match self {
            TaskKind::Ner | TaskKind::Es | TaskKind::Et => TaskFamily::Ner,
            TaskKind::Re | TaskKind::Ep | TaskKind::Epr => TaskFamily::Re,
            TaskKind::Ee | TaskKind::Eet | TaskKind::Eea => TaskFamily::Ee,
        }
    }

    pub fn is_auxiliary(self) -> bool {
        !matches!(self, TaskKind::Ner | TaskKind::Re | TaskKind::Ee)
    }

    pub fn main(family: TaskFamily) -> TaskKind {
        match family {
            TaskFamily::Ner => TaskKind::Ner,
            TaskFamily::Re => TaskKind::Re,
            TaskFamily::Ee => TaskKind::Ee,
        }
    }

    pub fn auxiliaries(family: TaskFamily) -> [TaskKind; 2] {
        match family {
            TaskFamily::Ner => [TaskKind::Es, TaskKind::Et],
            TaskFamily::Re => [TaskKind::Ep, TaskKind::Epr],
            TaskFamily::Ee => [TaskKind::Eet, TaskKind::Eea],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Ner => "NER",
            TaskKind::Re => "RE",
            TaskKind::Ee => "EE",
            TaskKind::Es => "ES",
            TaskKind::Et => "ET",
            TaskKind::Ep => "EP",
            TaskKind::Epr => "EPR",
            TaskKind::Eet => "EET",
            TaskKind::Eea => "EEA",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::IncompatibleTask {
                task: s.to_owned(),
                dataset: String::new(),
                reason: "unknown task kind".into(),
            })
    }
}

impl From<TaskKind> for String {
    fn from(kind: TaskKind) -> Self {
        kind.as_str().to_owned()
    }
}

impl TryFrom<String> for TaskKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}
