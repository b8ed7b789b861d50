//! Command-line front end. Every stage reads a TOML run config (optional),
//! applies flag overrides, runs one library operation and writes its outputs
//! plus a `<output>.manifest.json` describing how they were made.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::augment::{
    augment_records, default_specs, dissimilarity_stats, read_jsonl, write_jsonl, AugmentRequest, MethodRecord,
    VariantRecord,
};
use crate::contrastive::{pretrain, TrainConfig, CHECKPOINT_NAME, METRICS_NAME};
use crate::encoder::{init_params, load_encoder, Dims, EncoderParams, Pooling};
use crate::eval::synth::generate_synthetic_corpus;
use crate::eval::{clone_eval, export_embeddings, make_pairs, AttackConfig, ClonePair, PairConfig, Scorer, ScorerKind};
use crate::seed;
use crate::tokenizer::{train_vocab, SubwordVocab, Tokenizer, VocabConfig};
use crate::transforms::TransformSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    /// Dropout attempts per method, base included.
    pub variants: usize,
    pub transforms: Vec<TransformSpec>,
}

impl Default for AugmentSection {
    fn default() -> Self {
        AugmentSection { variants: 20, transforms: default_specs() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub scorer: ScorerKind,
    pub pooling: Pooling,
    /// Attack budget; 0 disables the attack.
    pub attack_n: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { scorer: ScorerKind::Cosine, pooling: Pooling::Max, attack_n: 0 }
    }
}

/// Everything that determines a run. The top-level `seed` is the only seed:
/// it replaces the `seed` fields of the `train` and `pairs` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub augment: AugmentSection,
    pub vocab: VocabConfig,
    pub train: TrainConfig,
    pub pairs: PairConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            augment: AugmentSection::default(),
            vocab: VocabConfig::default(),
            train: TrainConfig::default(),
            pairs: PairConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!("unsupported config schema_version {}", cfg.schema_version)));
        }
        Ok(cfg)
    }

    fn sync_seeds(&mut self) {
        self.train.seed = self.seed;
        self.pairs.seed = self.seed;
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or config; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The operation itself failed; exit code 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "equivar", version, about = "Program augmentation, contrastive pre-training and clone evaluation")]
pub struct Cli {
    /// TOML run config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic method corpus.
    Gen(GenArgs),
    /// Expand each method into its variant set.
    Augment(AugmentArgs),
    /// Variant-set sizes and pair dissimilarity of an augmented corpus.
    Stats(StatsArgs),
    /// Train a subword vocabulary on every program in a corpus.
    TrainVocab(TrainVocabArgs),
    /// Contrastive pre-training on an augmented corpus.
    Pretrain(PretrainArgs),
    /// Build a held-out clone-pair benchmark from an augmented corpus.
    MakePairs(MakePairsArgs),
    /// Zero-shot (optionally adversarial) clone detection.
    EvalClones(EvalArgs),
    /// Embed every variant of a corpus.
    Embed(EmbedArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Dropout attempts per method.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainVocabArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub queue_capacity: Option<usize>,
    #[arg(long)]
    pub refill: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub pool: Option<Pooling>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue from `last.ckpt` in the output directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct MakePairsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub clones_per_base: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Encoder or training checkpoint (cosine scorer; sets dims for random).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub scorer: Option<ScorerKind>,
    #[arg(long)]
    pub pool: Option<Pooling>,
    #[arg(long)]
    pub attack_n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-pair score dump (JSONL).
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub pool: Option<Pooling>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
    inputs: Vec<InputHash>,
    outputs: Vec<String>,
    wall_time_secs: f64,
    summary: serde_json::Value,
}

struct Run<'a> {
    command: &'a str,
    config: RunConfig,
    inputs: Vec<PathBuf>,
    start: Instant,
}

impl Run<'_> {
    fn finish(self, manifest_path: &Path, outputs: &[&Path], summary: serde_json::Value) -> Result<(), CliError> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|e| failed(format!("{}: {e}", p.display())))?;
                Ok(InputHash { path: p.display().to_string(), sha256: seed::content_hash(&bytes) })
            })
            .collect::<Result<_, CliError>>()?;
        let m = Manifest {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            seed: self.config.seed,
            config: &self.config,
            inputs,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            wall_time_secs: self.start.elapsed().as_secs_f64(),
            summary,
        };
        write_json(manifest_path, &m)
    }
}

fn manifest_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(failed)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| failed(format!("{}: {e}", path.display())))
}

/// Pretty JSON to `out`, or stdout.
fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(failed)?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(failed(e)),
                _ => Ok(()),
            }
        }
    }
}

fn need(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file", path.display())))
    }
}

fn load_tokenizer(path: &Path) -> Result<Tokenizer, CliError> {
    need(path)?;
    Ok(Tokenizer::new(SubwordVocab::load(path).map_err(failed)?))
}

fn load_params(path: &Path) -> Result<EncoderParams, CliError> {
    need(path)?;
    load_encoder(path).map_err(failed)
}

#[derive(Serialize)]
struct StatsReport {
    schema_version: u32,
    #[serde(flatten)]
    stats: crate::augment::CorpusStats,
    diverse_fraction: f64,
}

/// Parse arguments, run, and map the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(failed)?;
    let start = Instant::now();
    let run = |command, config: RunConfig, inputs: Vec<PathBuf>| Run { command, config, inputs, start };
    pool.install(|| match cli.command {
        Command::Gen(a) => {
            config.seed = a.seed.unwrap_or(config.seed);
            let corpus = generate_synthetic_corpus(a.count as usize, config.seed);
            write_jsonl(&a.out, &corpus).map_err(failed)?;
            let families: std::collections::BTreeSet<&str> = corpus.iter().map(|m| m.family.as_str()).collect();
            run("gen", config, vec![]).finish(
                &manifest_for(&a.out),
                &[&a.out],
                serde_json::json!({ "count": corpus.len(), "families": families.len() }),
            )
        }
        Command::Augment(a) => {
            need(&a.input)?;
            config.seed = a.seed.unwrap_or(config.seed);
            if let Some(n) = a.n {
                config.augment.variants = n as usize;
            }
            let req = AugmentRequest::new(config.augment.transforms.clone(), config.augment.variants, config.seed)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let records: Vec<MethodRecord> = read_jsonl(&a.input).map_err(failed)?;
            let (out, summary) = augment_records(&records, &req, jobs).map_err(failed)?;
            write_jsonl(&a.out, &out).map_err(failed)?;
            log::info!(
                "augmented {} methods ({} failed) at {:.1} methods/s",
                summary.methods,
                summary.parse_failures,
                summary.throughput_methods_per_sec
            );
            run("augment", config, vec![a.input.clone()]).finish(
                &manifest_for(&a.out),
                &[&a.out],
                serde_json::to_value(&summary).map_err(failed)?,
            )
        }
        Command::Stats(a) => {
            need(&a.input)?;
            config.seed = a.seed.unwrap_or(config.seed);
            let corpus: Vec<VariantRecord> = read_jsonl(&a.input).map_err(failed)?;
            let stats = dissimilarity_stats(&corpus, config.seed);
            let report = StatsReport { schema_version: SCHEMA_VERSION, diverse_fraction: stats.diverse_fraction(), stats };
            emit(a.out.as_deref(), &report)?;
            match &a.out {
                Some(out) => run("stats", config, vec![a.input.clone()]).finish(
                    &manifest_for(out),
                    &[out],
                    serde_json::Value::Null,
                ),
                None => Ok(()),
            }
        }
        Command::TrainVocab(a) => {
            need(&a.input)?;
            if let Some(s) = a.size {
                config.vocab.size = s;
            }
            let corpus: Vec<VariantRecord> = read_jsonl(&a.input).map_err(failed)?;
            let texts: Vec<&str> = corpus.iter().flat_map(|r| r.members()).collect();
            let vocab = train_vocab(&texts, &config.vocab).map_err(failed)?;
            vocab.save(&a.out).map_err(failed)?;
            let pieces = vocab.len();
            run("train-vocab", config, vec![a.input.clone()]).finish(
                &manifest_for(&a.out),
                &[&a.out],
                serde_json::json!({ "pieces": pieces, "texts": texts.len() }),
            )
        }
        Command::Pretrain(a) => {
            need(&a.input)?;
            config.seed = a.seed.unwrap_or(config.seed);
            let t = &mut config.train;
            t.steps = a.steps.unwrap_or(t.steps);
            t.batch_size = a.batch_size.unwrap_or(t.batch_size);
            t.queue_capacity = a.queue_capacity.unwrap_or(t.queue_capacity);
            t.queue_refill = a.refill.unwrap_or(t.queue_refill);
            t.learning_rate = a.lr.unwrap_or(t.learning_rate);
            t.pooling = a.pool.unwrap_or(t.pooling);
            config.sync_seeds();
            config.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let tokenizer = load_tokenizer(&a.vocab)?;
            let corpus: Vec<VariantRecord> = read_jsonl(&a.input).map_err(failed)?;
            let outcome = pretrain(&corpus, &tokenizer, &config.train, &a.out_dir, a.resume).map_err(failed)?;
            let last = outcome.reports.last().cloned();
            let metrics = a.out_dir.join(METRICS_NAME);
            run("pretrain", config, vec![a.input.clone(), a.vocab.clone()]).finish(
                &a.out_dir.join("manifest.json"),
                &[&outcome.checkpoint, &metrics],
                serde_json::json!({ "checkpoint": CHECKPOINT_NAME, "last_step": last }),
            )
        }
        Command::MakePairs(a) => {
            need(&a.input)?;
            config.seed = a.seed.unwrap_or(config.seed);
            config.pairs.clones_per_base = a.clones_per_base.unwrap_or(config.pairs.clones_per_base);
            config.sync_seeds();
            let corpus: Vec<VariantRecord> = read_jsonl(&a.input).map_err(failed)?;
            let bench = make_pairs(&corpus, &config.pairs).map_err(failed)?;
            write_jsonl(&a.out, &bench.pairs).map_err(failed)?;
            let clones = bench.pairs.iter().filter(|p| p.label == 1).count();
            run("make-pairs", config, vec![a.input.clone()]).finish(
                &manifest_for(&a.out),
                &[&a.out],
                serde_json::json!({
                    "pairs": bench.pairs.len(),
                    "clones": clones,
                    "bases_without_clones": bench.bases_without_clones,
                }),
            )
        }
        Command::EvalClones(a) => {
            need(&a.pairs)?;
            config.seed = a.seed.unwrap_or(config.seed);
            let e = &mut config.eval;
            e.scorer = a.scorer.unwrap_or(e.scorer);
            e.pooling = a.pool.unwrap_or(e.pooling);
            e.attack_n = a.attack_n.unwrap_or(e.attack_n);
            let (kind, pooling) = (e.scorer, e.pooling);
            let attack = match config.eval.attack_n {
                0 => None,
                n => Some(
                    AttackConfig::new(n, seed::derive_str(config.seed, "attack"))
                        .map_err(|e| CliError::Usage(e.to_string()))?,
                ),
            };
            let pairs: Vec<ClonePair> = read_jsonl(&a.pairs).map_err(failed)?;
            let mut inputs = vec![a.pairs.clone()];
            let tokenizer;
            let params;
            let scorer = match kind {
                ScorerKind::Edit => Scorer::Edit,
                ScorerKind::Cosine | ScorerKind::Random => {
                    let vocab = a.vocab.as_ref().ok_or_else(|| CliError::Usage(format!("--vocab is required for the {kind} scorer")))?;
                    tokenizer = load_tokenizer(vocab)?;
                    inputs.push(vocab.clone());
                    params = match (kind, &a.checkpoint) {
                        (ScorerKind::Cosine, None) => {
                            return Err(CliError::Usage("--checkpoint is required for the cosine scorer".into()))
                        }
                        (ScorerKind::Cosine, Some(p)) => {
                            inputs.push(p.clone());
                            load_params(p)?
                        }
                        (_, ckpt) => {
                            let dims = match ckpt {
                                Some(p) => {
                                    inputs.push(p.clone());
                                    load_params(p)?.dims
                                }
                                None => Dims::new(tokenizer.vocab().len()),
                            };
                            init_params(dims, seed::derive_str(config.seed, "random-init"))
                        }
                    };
                    Scorer::Embedding { params: &params, tokenizer: &tokenizer, pooling }
                }
            };
            let result = clone_eval(&scorer, kind, pooling, &pairs, attack.as_ref()).map_err(failed)?;
            emit(a.out.as_deref(), &result.report)?;
            let mut outputs: Vec<&Path> = Vec::new();
            if let Some(s) = &a.scores {
                write_jsonl(s, &result.scores).map_err(failed)?;
                outputs.push(s);
            }
            if let Some(o) = &a.out {
                outputs.insert(0, o);
            }
            match outputs.first() {
                Some(first) => run("eval-clones", config, inputs).finish(
                    &manifest_for(first),
                    &outputs,
                    serde_json::to_value(&result.report).map_err(failed)?,
                ),
                None => Ok(()),
            }
        }
        Command::Embed(a) => {
            need(&a.input)?;
            config.eval.pooling = a.pool.unwrap_or(config.eval.pooling);
            let tokenizer = load_tokenizer(&a.vocab)?;
            let params = load_params(&a.checkpoint)?;
            let corpus: Vec<VariantRecord> = read_jsonl(&a.input).map_err(failed)?;
            let rows = export_embeddings(&params, &tokenizer, &corpus, config.eval.pooling).map_err(failed)?;
            write_jsonl(&a.out, &rows).map_err(failed)?;
            run("embed", config, vec![a.input.clone(), a.vocab.clone(), a.checkpoint.clone()]).finish(
                &manifest_for(&a.out),
                &[&a.out],
                serde_json::json!({ "rows": rows.len() }),
            )
        }
    })
}
