//! Unified information extraction as instruction-following text generation.
//!
//! Annotated corpora for named entity recognition, relation extraction and
//! event extraction are normalized into one record format, compiled into
//! instruction prompts with deterministic gold outputs, and scored by parsing
//! generated text back into structured tuples.

pub mod error;
pub mod infer;
pub mod ingest;
pub mod instance;
pub mod metrics;
pub mod outparse;
pub mod schema;
pub mod splits;
pub mod synthetic;
pub mod task;
pub mod taskgen;
pub mod tuples;

pub use error::{Error, Result};
pub use instance::{Argument, EntityMention, EventMention, Instance, RelationMention, Span};
pub use metrics::{Counts, EvalReport, Metric, PredictionRecord, Score, ScoreOptions};
pub use outparse::{parse, ParseDiagnostics, Prediction};
pub use schema::{label_key, naturalize_label, LabelSchema, TaskFamily};
pub use task::TaskKind;
pub use taskgen::{build_prompt, compile_dataset, CompiledCorpus, InstructionBank, PromptInstance};
pub use tuples::{Extraction, NONE};
