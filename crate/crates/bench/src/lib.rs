//! Inputs shared by the benchmarks.

use uniex::synthetic::{desk_corpus, SyntheticDataset};
use uniex::taskgen::InstructionBank;
use uniex::{compile_dataset, PromptInstance, TaskKind};

pub fn corpus(per_dataset: usize) -> Vec<SyntheticDataset> {
    desk_corpus(per_dataset, 17, 0.02)
}

/// Every dataset compiled for its main task and auxiliaries.
pub fn compiled(datasets: &[SyntheticDataset]) -> Vec<(usize, Vec<PromptInstance>)> {
    let bank = InstructionBank::default();
    datasets
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let family = d.schema.task();
            let tasks = std::iter::once(TaskKind::main(family)).chain(TaskKind::auxiliaries(family)).collect();
            (i, compile_dataset(&d.instances, &tasks, &d.schema, &bank, 0).expect("compiles").prompts)
        })
        .collect()
}
