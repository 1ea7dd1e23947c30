mod io;

use std::collections::{BTreeSet, HashMap};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use uniex::infer::{ClientConfig, DecodeParams, GenerationCache, GenerationRequest, HttpEndpoint, InferenceClient, TOKEN_ENV};
use uniex::ingest::{ingest_json, ingest_token_tagged, IngestReport, TaggingScheme};
use uniex::metrics::{score, EvalReport, Metric, PredictionRecord, ScoreOptions};
use uniex::schema::{load_alias_groups, unify_labels};
use uniex::splits::{plan_split, write_split, LabelField, SplitInputs, SplitMode, SplitSpec, ZeroShotSpec};
use uniex::{compile_dataset, parse, Instance, InstructionBank, LabelSchema, PromptInstance, TaskFamily, TaskKind};

#[derive(Parser)]
#[command(name = "uniex", version, about = "Unified information-extraction corpus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a token-tagged or JSONL corpus into canonical JSONL.
    Ingest(IngestArgs),
    /// Derive a schema file from the raw labels of a corpus.
    Schema(SchemaArgs),
    /// Merge label aliases across schema files.
    Unify(UnifyArgs),
    /// Compile canonical instances into prompt records.
    Compile(CompileArgs),
    /// Send compiled prompts to a generation endpoint.
    Infer(InferArgs),
    /// Parse generations into structured predictions.
    Parse(ParseArgs),
    /// Score predictions against gold instances.
    Score(ScoreArgs),
    /// Build train/val/test partitions and a manifest.
    Split(SplitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// Whitespace-separated columns, token first and tag last.
    Conll,
    /// Canonical JSONL.
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Bio,
    Bio2,
}

impl From<Scheme> for TaggingScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Bio => TaggingScheme::Bio,
            Scheme::Bio2 => TaggingScheme::Bio2,
        }
    }
}

#[derive(clap::Args)]
struct CorpusArgs {
    #[arg(long, value_enum, default_value = "jsonl")]
    format: InputFormat,
    #[arg(long, value_enum, default_value = "bio2")]
    scheme: Scheme,
    /// Dataset name; required for token-tagged input.
    #[arg(long)]
    dataset: Option<String>,
    /// Annotation family: NER, RE or EE.
    #[arg(long, default_value = "NER")]
    task: TaskFamily,
    #[arg(long)]
    input: PathBuf,
}

#[derive(clap::Args)]
struct IngestArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Schema used to map raw labels to canonical names.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write diagnostics as JSONL here instead of stderr.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SchemaArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Explicit naming, as RAW=canonical; repeatable.
    #[arg(long = "override", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct UnifyArgs {
    /// JSON array of {"canonical", "aliases"} groups.
    #[arg(long)]
    aliases: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(required = true)]
    schemas: Vec<PathBuf>,
}

#[derive(clap::Args)]
struct CompileArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Tasks to compile; defaults to the main task and its auxiliaries.
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<TaskKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extra instruction templates, JSON object of task to list.
    #[arg(long)]
    instructions: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write delimiter-ambiguity flags as JSONL here.
    #[arg(long)]
    ambiguous: Option<PathBuf>,
}

#[derive(clap::Args)]
struct InferArgs {
    #[arg(long)]
    endpoint: String,
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 8)]
    concurrency: usize,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    max_tokens: u32,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    /// Stop sequence; repeatable.
    #[arg(long)]
    stop: Vec<String>,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long, env = TOKEN_ENV, hide_env_values = true)]
    token: Option<String>,
    /// Compiled JSONL.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ParseArgs {
    /// Schema file; repeatable, matched to records by dataset.
    #[arg(long, required = true)]
    schema: Vec<PathBuf>,
    /// JSONL of {"id", "task", "dataset", "generation"}.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ScoreArgs {
    /// Canonical gold JSONL.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// ner, re, ee_trigger or ee_argument; repeatable. Defaults to every
    /// metric whose task appears in the predictions.
    #[arg(long)]
    task: Vec<Metric>,
    /// Report each dataset separately as well as the aggregate.
    #[arg(long)]
    by_dataset: bool,
    /// Leave out gold instances whose serialization is delimiter-ambiguous.
    #[arg(long)]
    exclude_ambiguous: bool,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Official,
    Ratio811,
    HalfVal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    Relation,
    Entity,
}

#[derive(clap::Args)]
struct SplitArgs {
    #[arg(long, value_enum, default_value = "official")]
    mode: Mode,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Training-set sample size.
    #[arg(long, default_value_t = 10_000, conflicts_with = "no_cap")]
    cap: usize,
    #[arg(long)]
    no_cap: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of labels to hold out.
    #[arg(long = "zero-shot", value_name = "M")]
    zero_shot: Option<usize>,
    #[arg(long, value_delimiter = ',', requires = "zero_shot")]
    zero_shot_seeds: Vec<u64>,
    #[arg(long, value_enum, default_value = "relation")]
    label_field: Field,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(a, b)| (a.to_owned(), b.to_owned()))
        .ok_or_else(|| format!("expected RAW=canonical, got `{s}`"))
}

fn load_schema(path: &Path) -> Result<LabelSchema> {
    io::read_json(path)
}

fn read_corpus(args: &CorpusArgs, schema: Option<&LabelSchema>) -> Result<IngestReport> {
    let reader = io::open(&args.input)?;
    Ok(match args.format {
        InputFormat::Conll => {
            let dataset = args.dataset.as_deref().context("--dataset is required for conll input")?;
            ingest_token_tagged(reader, args.scheme.into(), dataset, schema)?
        }
        InputFormat::Jsonl => ingest_json(reader, args.task, schema)?,
    })
}

fn ingest(args: IngestArgs) -> Result<()> {
    let schema = args.schema.as_deref().map(load_schema).transpose()?;
    let report = read_corpus(&args.corpus, schema.as_ref())?;
    match &args.diagnostics {
        Some(path) => io::write_jsonl(Some(path), &report.diagnostics)?,
        None => report.diagnostics.iter().for_each(|d| log::warn!("{d}")),
    }
    io::write_jsonl(args.output.as_deref(), &report.instances)?;
    eprintln!("ingested {} instances, rejected {}", report.instances.len(), report.rejected());
    Ok(())
}

fn schema_cmd(args: SchemaArgs) -> Result<()> {
    let report = read_corpus(&args.corpus, None)?;
    let overrides: HashMap<String, String> = args.overrides.into_iter().collect();
    let dataset = match &args.corpus.dataset {
        Some(d) => d.clone(),
        None => report.instances.first().map(|i| i.dataset.clone()).context("corpus is empty")?,
    };
    let i = &report.instances;
    let schema = match args.corpus.task {
        TaskFamily::Ner => LabelSchema::from_raw_labels(
            dataset,
            TaskFamily::Ner,
            i.iter().flat_map(|x| &x.entities).map(|e| e.label.as_str()),
            &overrides,
        )?,
        TaskFamily::Re => LabelSchema::from_raw_labels(
            dataset,
            TaskFamily::Re,
            i.iter().flat_map(|x| &x.relations).map(|r| r.relation.as_str()),
            &overrides,
        )?,
        TaskFamily::Ee => LabelSchema::from_raw_events(
            dataset,
            i.iter().flat_map(|x| &x.events).map(|e| e.event_type.as_str()),
            i.iter().flat_map(|x| &x.events).flat_map(|e| &e.arguments).map(|a| a.role.as_str()),
            &overrides,
        )?,
    };
    let mut out = io::sink(args.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &schema)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn unify(args: UnifyArgs) -> Result<()> {
    let groups = load_alias_groups(&std::fs::read_to_string(&args.aliases)?)?;
    let schemas = args.schemas.iter().map(|p| load_schema(p)).collect::<Result<Vec<_>>>()?;
    let unified = unify_labels(&schemas, &groups)?;
    std::fs::create_dir_all(&args.out_dir)?;
    for (path, schema) in args.schemas.iter().zip(&unified) {
        let name = path.file_name().context("schema path has no file name")?;
        io::write_json(&args.out_dir.join(name), schema)?;
    }
    Ok(())
}

fn compile(args: CompileArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let bank = match &args.instructions {
        Some(p) => InstructionBank::with_extra_json(&std::fs::read_to_string(p)?)?,
        None => InstructionBank::default(),
    };
    let tasks: BTreeSet<TaskKind> = if args.tasks.is_empty() {
        let family = schema.task();
        std::iter::once(TaskKind::main(family)).chain(TaskKind::auxiliaries(family)).collect()
    } else {
        args.tasks.iter().copied().collect()
    };
    let instances: Vec<Instance> = io::read_jsonl(&args.input)?;
    let compiled = compile_dataset(&instances, &tasks, &schema, &bank, args.seed)?;
    io::write_jsonl(args.output.as_deref(), &compiled.prompts)?;
    if let Some(path) = &args.ambiguous {
        io::write_jsonl(Some(path), &compiled.ambiguous)?;
    }
    eprintln!(
        "compiled {} prompts from {} instances; {} flagged delimiter-ambiguous",
        compiled.prompts.len(),
        instances.len(),
        compiled.ambiguous.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct GenerationLine<'a> {
    id: &'a str,
    source_id: &'a str,
    dataset: &'a str,
    task: TaskKind,
    generation: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    latency_ms: u64,
    attempts: u32,
    cache_hit: bool,
}

fn infer(args: InferArgs) -> Result<()> {
    let prompts: Vec<PromptInstance> = io::read_jsonl(&args.input)?;
    let params = DecodeParams { max_tokens: args.max_tokens, temperature: args.temperature, stop: args.stop };
    let requests: Vec<GenerationRequest> =
        prompts.iter().map(|p| GenerationRequest::from_prompt(p, params.clone())).collect();
    let endpoint = HttpEndpoint::new(args.endpoint, args.token, Duration::from_secs(args.timeout_secs))?;
    let cache = args.cache_dir.as_deref().map(GenerationCache::open).transpose()?;
    let config = ClientConfig { model: args.model, concurrency: args.concurrency, max_retries: args.retries, ..Default::default() };
    let client = InferenceClient::new(endpoint, config, cache)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let records = runtime.block_on(client.generate_batch(&requests));
    let lines: Vec<GenerationLine> = prompts
        .iter()
        .zip(&records)
        .map(|(p, r)| GenerationLine {
            id: &r.id,
            source_id: &p.source_id,
            dataset: &p.dataset,
            task: p.task,
            generation: r.generation.as_deref(),
            error: r.error.as_deref(),
            latency_ms: r.latency_ms,
            attempts: r.attempts,
            cache_hit: r.cache_hit,
        })
        .collect();
    io::write_jsonl(args.output.as_deref(), &lines)?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let hits = records.iter().filter(|r| r.cache_hit).count();
    eprintln!("{} generations, {hits} from cache, {failed} failed", records.len());
    Ok(())
}

#[derive(Deserialize)]
struct GenerationInput {
    id: String,
    #[serde(default)]
    source_id: Option<String>,
    task: TaskKind,
    dataset: String,
    #[serde(default)]
    generation: Option<String>,
}

fn parse_cmd(args: ParseArgs) -> Result<()> {
    let mut schemas: HashMap<String, LabelSchema> = HashMap::new();
    for path in &args.schema {
        let s = load_schema(path)?;
        schemas.insert(s.dataset().to_owned(), s);
    }
    let inputs: Vec<GenerationInput> = io::read_jsonl(&args.input)?;
    let mut records = Vec::with_capacity(inputs.len());
    for g in inputs {
        let schema = schemas
            .get(&g.dataset)
            .with_context(|| format!("no schema given for dataset `{}` (record {})", g.dataset, g.id))?;
        if g.task.family() != schema.task() {
            bail!("record {}: task {} does not match the {} schema of `{}`", g.id, g.task, schema.task(), g.dataset);
        }
        let prediction = parse(g.generation.as_deref().unwrap_or_default(), g.task, schema);
        records.push(PredictionRecord { id: g.id, source_id: g.source_id, dataset: g.dataset, prediction });
    }
    io::write_jsonl(args.output.as_deref(), &records)?;
    Ok(())
}

fn score_cmd(args: ScoreArgs) -> Result<()> {
    let golds: Vec<Instance> = io::read_jsonl(&args.gold)?;
    let preds: Vec<PredictionRecord> = io::read_jsonl(&args.predictions)?;
    let metrics: Vec<Metric> = if args.task.is_empty() {
        Metric::ALL.into_iter().filter(|m| preds.iter().any(|p| p.prediction.task == m.task())).collect()
    } else {
        args.task.clone()
    };
    if metrics.is_empty() {
        bail!("no predictions for a scored task (NER, RE or EE)");
    }
    let options = ScoreOptions { exclude_ambiguous: args.exclude_ambiguous };
    let mut reports: Vec<EvalReport> = Vec::new();
    for metric in metrics {
        // Gold datasets without predictions for this task belong to other tasks.
        let datasets: BTreeSet<&str> =
            preds.iter().filter(|p| p.prediction.task == metric.task()).map(|p| p.dataset.as_str()).collect();
        let relevant: Vec<Instance> = golds.iter().filter(|g| datasets.contains(g.dataset.as_str())).cloned().collect();
        let mut report = score(metric, &relevant, &preds, options)?;
        if !args.by_dataset {
            report.per_dataset.clear();
        }
        print!("{}", report.to_table());
        reports.push(report);
    }
    if let Some(path) = &args.report {
        io::write_json(path, &reports)?;
    }
    Ok(())
}

fn split(args: SplitArgs) -> Result<()> {
    let mode = match args.mode {
        Mode::Official => SplitMode::Official,
        Mode::Ratio811 => SplitMode::Ratio811,
        Mode::HalfVal => SplitMode::HalfVal,
    };
    let zero_shot = args.zero_shot.map(|m| ZeroShotSpec {
        unseen_count: m,
        seeds: if args.zero_shot_seeds.is_empty() { vec![args.seed] } else { args.zero_shot_seeds.clone() },
        label_field: match args.label_field {
            Field::Relation => LabelField::Relation,
            Field::Entity => LabelField::Entity,
        },
    });
    let spec = SplitSpec { mode, sample_cap: (!args.no_cap).then_some(args.cap), seed: args.seed, zero_shot };
    let inputs = SplitInputs {
        train: io::read_jsonl(&args.train)?,
        val: args.val.as_deref().map(io::read_jsonl).transpose()?,
        test: args.test.as_deref().map(io::read_jsonl).transpose()?,
    };
    let plan = plan_split(&spec, inputs)?;
    for split in &plan.zero_shot {
        for w in &split.warnings {
            log::warn!("seed {}: {w}", split.seed);
        }
    }
    let manifest = write_split(&args.out_dir, &spec, &plan)?;
    for p in &manifest.partitions {
        eprintln!("{:<24} {:>8} records  {}", p.name, p.records, p.file);
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Schema(a) => schema_cmd(a),
        Command::Unify(a) => unify(a),
        Command::Compile(a) => compile(a),
        Command::Infer(a) => infer(a),
        Command::Parse(a) => parse_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Split(a) => split(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
