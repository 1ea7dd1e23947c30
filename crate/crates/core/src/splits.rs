//! Seeded split construction: 8:1:1 partitioning, halving a validation set
//! into validation and test, per-dataset sampling caps, and unseen-label
//! zero-shot splits.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64`, and every
//! draw is a `u64` range sample, so results are identical across platforms
//! for a given input order and seed.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::write_jsonl;
use crate::instance::Instance;

/// Identifies the generator in manifests.
pub const PRNG_NAME: &str = "chacha8/seed_from_u64";

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fisher-Yates with `u64` draws.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}

fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut out = items.to_vec();
    shuffle(&mut out, &mut rng(seed));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainValTest<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffles and cuts into floor(0.8n) / floor(0.1n) / remainder.
pub fn split_811<T: Clone>(items: &[T], seed: u64) -> Result<TrainValTest<T>> {
    let n = items.len();
    if n < 10 {
        return Err(Error::Split(format!("8:1:1 split needs at least 10 instances, got {n}")));
    }
    let mut all = shuffled(items, seed);
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    let test = all.split_off(n_train + n_val);
    let val = all.split_off(n_train);
    Ok(TrainValTest { train: all, val, test })
}

/// Keeps `train`, shuffles `val`, and gives the first floor(|val|/2) to the
/// new validation set and the rest to test.
pub fn split_half_val<T: Clone>(train: Vec<T>, val: &[T], seed: u64) -> Result<TrainValTest<T>> {
    if val.len() < 2 {
        return Err(Error::Split(format!(
            "halving a validation set needs at least 2 instances, got {}",
            val.len()
        )));
    }
    let mut new_val = shuffled(val, seed);
    let test = new_val.split_off(val.len() / 2);
    Ok(TrainValTest { train, val: new_val, test })
}

/// Uniform sample of exactly `cap` items without replacement, in input order.
/// Inputs no larger than `cap` are returned whole.
pub fn sample_cap<T: Clone>(items: &[T], cap: usize, seed: u64) -> Result<Vec<T>> {
    if cap == 0 {
        return Err(Error::Split("sample cap must be at least 1".into()));
    }
    if items.len() <= cap {
        return Ok(items.to_vec());
    }
    let mut indices: Vec<usize> = (0..items.len()).collect();
    let mut rng = rng(seed);
    // Partial Fisher-Yates: the first `cap` slots end up a uniform sample.
    for i in 0..cap {
        let j = rng.random_range(i as u64..items.len() as u64) as usize;
        indices.swap(i, j);
    }
    let mut chosen = indices[..cap].to_vec();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| items[i].clone()).collect())
}

/// Which annotation carries the labels held out in a zero-shot split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelField {
    Relation,
    Entity,
}

pub fn instance_labels(instance: &Instance, field: LabelField) -> BTreeSet<&str> {
    match field {
        LabelField::Relation => instance.relations.iter().map(|r| r.relation.as_str()).collect(),
        LabelField::Entity => instance.entities.iter().map(|e| e.label.as_str()).collect(),
    }
}

/// Labels of `field` in first-appearance order.
pub fn observed_labels(instances: &[Instance], field: LabelField) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for inst in instances {
        let labels: Vec<&str> = match field {
            LabelField::Relation => inst.relations.iter().map(|r| r.relation.as_str()).collect(),
            LabelField::Entity => inst.entities.iter().map(|e| e.label.as_str()).collect(),
        };
        for label in labels {
            if seen.insert(label) {
                out.push(label.to_owned());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroShotSplit {
    pub seed: u64,
    pub unseen_labels: Vec<String>,
    #[serde(skip)]
    pub train_pool: Vec<Instance>,
    #[serde(skip)]
    pub test: Vec<Instance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// One split per seed: `m` labels drawn uniformly become unseen; every
/// instance carrying any of them goes to test, all others to the training
/// pool. An instance with both seen and unseen labels is a test instance.
///
/// If a drawn label has no instances it is redrawn once; a second miss is
/// kept and reported in `warnings`.
pub fn zero_shot_label_split(
    instances: &[Instance],
    labels: &[String],
    m: usize,
    seeds: &[u64],
    field: LabelField,
) -> Result<Vec<ZeroShotSplit>> {
    if m == 0 || m >= labels.len() {
        return Err(Error::Split(format!(
            "unseen label count must be in 1..{}, got {m}",
            labels.len()
        )));
    }
    let populated: HashSet<&str> = instances.iter().flat_map(|i| instance_labels(i, field)).collect();
    let unlabeled = instances
        .iter()
        .filter(|i| !instance_labels(i, field).iter().any(|l| labels.iter().any(|x| x == l)))
        .count();
    seeds
        .iter()
        .map(|&seed| {
            let mut rng = rng(seed);
            let mut warnings = Vec::new();
            if unlabeled > 0 {
                warnings.push(format!("{unlabeled} instance(s) carry no label from the set; kept in the training pool"));
            }
            let mut draw = || {
                let mut pool = labels.to_vec();
                shuffle(&mut pool, &mut rng);
                pool.truncate(m);
                pool
            };
            let mut unseen = draw();
            let empty = |u: &[String]| -> Vec<String> {
                u.iter().filter(|l| !populated.contains(l.as_str())).cloned().collect()
            };
            let mut missing = empty(&unseen);
            if !missing.is_empty() {
                log::warn!("seed {seed}: unseen label(s) without instances {missing:?}; redrawing");
                unseen = draw();
                missing = empty(&unseen);
                if !missing.is_empty() {
                    warnings.push(format!("unseen label(s) without instances: {}", missing.join(", ")));
                }
            }
            // Report labels in label-set order.
            unseen.sort_by_key(|l| labels.iter().position(|x| x == l));
            let held: HashSet<&str> = unseen.iter().map(String::as_str).collect();
            let (test, train_pool): (Vec<Instance>, Vec<Instance>) = instances
                .iter()
                .cloned()
                .partition(|inst| instance_labels(inst, field).iter().any(|l| held.contains(l)));
            Ok(ZeroShotSplit { seed, unseen_labels: unseen, train_pool, test, warnings })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Keep the splits the dataset ships with.
    Official,
    /// A single pool cut 8:1:1.
    Ratio811,
    /// Train plus validation; half of validation becomes test.
    HalfVal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroShotSpec {
    pub unseen_count: usize,
    pub seeds: Vec<u64>,
    pub label_field: LabelField,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_cap: Option<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_shot: Option<ZeroShotSpec>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sample_cap == Some(0) {
            return Err(Error::Split("sample cap must be at least 1".into()));
        }
        if let Some(zs) = &self.zero_shot {
            if zs.unseen_count == 0 {
                return Err(Error::Split("unseen label count must be at least 1".into()));
            }
            if zs.seeds.is_empty() {
                return Err(Error::Split("zero-shot splitting needs at least one seed".into()));
            }
        }
        Ok(())
    }
}

/// Raw partitions handed to [`plan_split`].
#[derive(Debug, Clone, Default)]
pub struct SplitInputs {
    pub train: Vec<Instance>,
    pub val: Option<Vec<Instance>>,
    pub test: Option<Vec<Instance>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub name: String,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub partitions: Vec<Partition>,
    pub zero_shot: Vec<ZeroShotSplit>,
}

fn partition(name: impl Into<String>, instances: Vec<Instance>) -> Partition {
    Partition { name: name.into(), instances }
}

/// Applies a [`SplitSpec`]. The sampling cap only touches training data.
///
/// With a zero-shot spec, the inputs are pooled in train/val/test order and
/// each seed yields a `zs-seed<N>-train` and `zs-seed<N>-test` partition;
/// `mode` must then be `official`.
pub fn plan_split(spec: &SplitSpec, inputs: SplitInputs) -> Result<SplitPlan> {
    spec.validate()?;
    let cap = |train: Vec<Instance>| -> Result<Vec<Instance>> {
        match spec.sample_cap {
            Some(c) => sample_cap(&train, c, spec.seed),
            None => Ok(train),
        }
    };
    if let Some(zs) = &spec.zero_shot {
        if spec.mode != SplitMode::Official {
            return Err(Error::Split("zero-shot splits are built from official data only".into()));
        }
        let mut pool = inputs.train;
        pool.extend(inputs.val.unwrap_or_default());
        pool.extend(inputs.test.unwrap_or_default());
        let labels = observed_labels(&pool, zs.label_field);
        let splits = zero_shot_label_split(&pool, &labels, zs.unseen_count, &zs.seeds, zs.label_field)?;
        let mut partitions = Vec::with_capacity(splits.len() * 2);
        for split in &splits {
            partitions.push(partition(format!("zs-seed{}-train", split.seed), cap(split.train_pool.clone())?));
            partitions.push(partition(format!("zs-seed{}-test", split.seed), split.test.clone()));
        }
        return Ok(SplitPlan { partitions, zero_shot: splits });
    }
    let tvt = match spec.mode {
        SplitMode::Official => TrainValTest {
            train: inputs.train,
            val: inputs.val.unwrap_or_default(),
            test: inputs.test.unwrap_or_default(),
        },
        SplitMode::Ratio811 => {
            if inputs.val.is_some() || inputs.test.is_some() {
                return Err(Error::Split("ratio811 takes a single input pool".into()));
            }
            split_811(&inputs.train, spec.seed)?
        }
        SplitMode::HalfVal => {
            if inputs.test.is_some() {
                return Err(Error::Split("half_val takes train and validation inputs only".into()));
            }
            let val = inputs
                .val
                .ok_or_else(|| Error::Split("half_val needs a validation input".into()))?;
            split_half_val(inputs.train, &val, spec.seed)?
        }
    };
    Ok(SplitPlan {
        partitions: vec![
            partition("train", cap(tvt.train)?),
            partition("val", tvt.val),
            partition("test", tvt.test),
        ],
        zero_shot: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionEntry {
    pub name: String,
    pub file: String,
    pub records: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub spec: SplitSpec,
    pub prng: String,
    pub partitions: Vec<PartitionEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_shot: Vec<ZeroShotSplit>,
}

impl SplitManifest {
    /// Pretty JSON with a trailing newline; the bytes written to `manifest.json`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// Writes `<name>.jsonl` per partition and a `manifest.json` into `dir`.
/// Output bytes depend only on the plan and the spec.
pub fn write_split(dir: &Path, spec: &SplitSpec, plan: &SplitPlan) -> Result<SplitManifest> {
    fs::create_dir_all(dir)?;
    let mut partitions = Vec::with_capacity(plan.partitions.len());
    for part in &plan.partitions {
        let mut bytes = Vec::new();
        write_jsonl(&mut bytes, &part.instances)?;
        let file = format!("{}.jsonl", part.name);
        fs::write(dir.join(&file), &bytes)?;
        partitions.push(PartitionEntry {
            name: part.name.clone(),
            file,
            records: part.instances.len(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let manifest = SplitManifest {
        spec: spec.clone(),
        prng: PRNG_NAME.to_owned(),
        partitions,
        zero_shot: plan.zero_shot.clone(),
    };
    fs::write(dir.join("manifest.json"), manifest.to_bytes()?)?;
    Ok(manifest)
}
