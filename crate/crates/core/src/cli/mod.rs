//! The `turnpilot` command line: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Settings
//! resolve as flag > `TURNPILOT_*` environment variable > `--config` file >
//! built-in default.

mod config;
mod report;

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::completeness::{
    self, build_training_set, predict, CompletenessModel, IncrementalClassifier, Instance,
    LabelProvenance, TrainConfig, DEFAULT_CUTOFF,
};
use crate::corpus::parse_levels;
use crate::experiment::{self, AnalyzeParams, GenerateOptions, RunDir, ScoreParams};
use crate::providers::{
    load_recorded, ChatBackend, ChatClient, EmbedClient, MockChat, PromptParams, RateLimiter,
    RemoteChat, RemoteEmbedder, ResponseCache, SystemClock, REFERENCE_EMBED_MODEL,
};
use crate::turnsim::{self, LatencyProfile, TurnPolicy, DEFAULT_FILLER_LATENCY_MS};

pub use config::{
    pick, AnalysisConfig, ClassifierConfig, CorpusConfig, ProvidersConfig, RunConfig,
    SimulatorConfig,
};
pub use report::{
    collect, emit_report, BoxRow, ReportData, ReportError, ReportFormat, RetainedRow, REPORT_INPUTS,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "turnpilot",
    version,
    about = "Truncated-question experiments and turn-taking latency simulation"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "TURNPILOT_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load an NQ-style JSONL corpus into a run directory.
    Ingest(IngestArgs),
    /// Write truncated variants of every question.
    Truncate(TruncateArgs),
    /// Generate one chat response per variant.
    Generate(GenerateArgs),
    /// Score reference and truncation similarities.
    Score(ScoreArgs),
    /// Gold subset, labels, retained counts and stats.json.
    Analyze(AnalyzeArgs),
    /// Train the prefix completeness classifier.
    Train(TrainArgs),
    /// Score a prefix, or a word stream read line by line from stdin.
    Classify(ClassifyArgs),
    /// Simulate turn gaps under a policy and latency profile.
    Simulate(SimulateArgs),
    /// Write histogram, box-whisker and retained-count files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArg {
    /// Run directory.
    #[arg(long, env = "TURNPILOT_RUN")]
    pub run: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub run: RunArg,
    /// Corpus JSONL.
    #[arg(long, env = "TURNPILOT_CORPUS")]
    pub input: Option<PathBuf>,
    /// Number of examples to keep [default: 1000].
    #[arg(long, env = "TURNPILOT_LIMIT")]
    pub limit: Option<usize>,
    /// Drop negative controls before applying the limit [default: false].
    #[arg(long, env = "TURNPILOT_FILTER_BEFORE_LIMIT", num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub filter_before_limit: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TruncateArgs {
    #[command(flatten)]
    pub run: RunArg,
    /// Comma-separated truncation levels [default: 0,1,2,3].
    #[arg(long, env = "TURNPILOT_LEVELS")]
    pub levels: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChatProvider {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderKind {
    Deterministic,
    Remote,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub run: RunArg,
    /// Chat backend [default: mock].
    #[arg(long, env = "TURNPILOT_PROVIDER")]
    pub provider: Option<ChatProvider>,
    /// Recorded responses for the mock backend.
    #[arg(long, env = "TURNPILOT_RECORDED")]
    pub recorded: Option<PathBuf>,
    /// OpenAI-compatible base URL for the remote backend.
    #[arg(long, env = "TURNPILOT_CHAT_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Model id [default: gpt-4].
    #[arg(long, env = "TURNPILOT_CHAT_MODEL")]
    pub model: Option<String>,
    #[arg(long, env = "TURNPILOT_TEMPERATURE")]
    pub temperature: Option<f64>,
    #[arg(long, env = "TURNPILOT_MAX_TOKENS")]
    pub max_tokens: Option<u32>,
    /// Concurrent requests [default: 4].
    #[arg(long, env = "TURNPILOT_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Requests per second to the remote backend [default: 2].
    #[arg(long, env = "TURNPILOT_RATE_LIMIT")]
    pub rate_limit: Option<f64>,
    /// Response cache [default: <run>/cache].
    #[arg(long, env = "TURNPILOT_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Largest tolerated fraction of failed generations [default: 0.02].
    #[arg(long, env = "TURNPILOT_FAILURE_CEILING")]
    pub failure_ceiling: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub run: RunArg,
    /// Embedding backend [default: deterministic].
    #[arg(long, env = "TURNPILOT_EMBEDDER")]
    pub embedder: Option<EmbedderKind>,
    #[arg(long, env = "TURNPILOT_EMBED_ENDPOINT")]
    pub embed_endpoint: Option<String>,
    #[arg(long, env = "TURNPILOT_EMBED_MODEL")]
    pub embed_model: Option<String>,
    #[arg(long, env = "TURNPILOT_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, env = "TURNPILOT_RATE_LIMIT")]
    pub rate_limit: Option<f64>,
    /// Gold-subset percentile [default: 75].
    #[arg(long, env = "TURNPILOT_GOLD_PERCENTILE")]
    pub percentile: Option<f64>,
    /// Score truncations for every example, not only the gold subset.
    #[arg(long, env = "TURNPILOT_SCORE_ALL", num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub score_all: Option<bool>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub run: RunArg,
    #[arg(long, env = "TURNPILOT_GOLD_PERCENTILE")]
    pub percentile: Option<f64>,
    /// Label threshold [default: the gold-subset threshold].
    #[arg(long, env = "TURNPILOT_THETA")]
    pub theta: Option<f64>,
    #[arg(long, env = "TURNPILOT_SCORE_ALL", num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub score_all: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Train on this run's labels.
    #[arg(long, env = "TURNPILOT_RUN", conflicts_with = "synthetic")]
    pub run: Option<PathBuf>,
    /// Train on N synthetic labeled prefixes instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Where to write the model [default: <run>/model.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long, env = "TURNPILOT_SEED")]
    pub seed: Option<u64>,
    /// Add each full question as a complete example [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub include_full: Option<bool>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, env = "TURNPILOT_MODEL")]
    pub model: PathBuf,
    /// Firing threshold [default: 0.8].
    #[arg(long, env = "TURNPILOT_CUTOFF")]
    pub cutoff: Option<f64>,
    /// Read one word per line from stdin and score each growing prefix.
    #[arg(long, conflicts_with = "text")]
    pub stream: bool,
    /// Prefix to score.
    #[arg(required_unless_present = "stream")]
    pub text: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Serial,
    Eager,
    Filler,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArg,
    #[arg(long, value_enum)]
    pub policy: PolicyKind,
    /// Words cut under the eager policy.
    #[arg(long, default_value_t = 2)]
    pub k: u8,
    /// Built-in profile name or TOML path [default: paper-groq].
    #[arg(long, env = "TURNPILOT_PROFILE")]
    pub profile: Option<String>,
    /// Completeness model for the filler policy.
    #[arg(long, env = "TURNPILOT_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "TURNPILOT_CUTOFF")]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub filler_latency_ms: Option<f64>,
    /// Response length in tokens [default: 60].
    #[arg(long)]
    pub response_tokens: Option<u32>,
    /// Use each level-0 response's token count instead.
    #[arg(long)]
    pub tokens_from_responses: bool,
    /// Overrides the profile's seed.
    #[arg(long, env = "TURNPILOT_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Output directory [default: <run>/simulation].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub run: RunArg,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Ingest(a) => ingest(a, &config),
        Command::Truncate(a) => truncate(a, &config),
        Command::Generate(a) => generate(a, &config),
        Command::Score(a) => score(a, &config),
        Command::Analyze(a) => analyze(a, &config),
        Command::Train(a) => train(a, &config),
        Command::Classify(a) => classify(a, &config),
        Command::Simulate(a) => simulate(a, &config),
        Command::Report(a) => report(a),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(runtime)?;
    writeln!(out).map_err(runtime)
}

fn ingest(a: IngestArgs, c: &RunConfig) -> Result<(), Failure> {
    let input = pick(a.input.map(Some), c.corpus.path.clone().map(Some), None)
        .ok_or_else(|| usage("ingest needs --input (or corpus.path in the config)"))?;
    let limit = pick(a.limit, c.corpus.limit, 1000);
    let filter = pick(a.filter_before_limit, c.corpus.filter_before_limit, false);
    let run = RunDir::new(&a.run.run);
    std::fs::create_dir_all(run.root()).map_err(runtime)?;
    let manifest = experiment::ingest(&run, &input, limit, filter).map_err(runtime)?;
    print_json(&manifest)
}

fn truncate(a: TruncateArgs, c: &RunConfig) -> Result<(), Failure> {
    let spec = pick(a.levels, c.corpus.levels.clone(), "0,1,2,3".into());
    let levels = parse_levels(&spec).map_err(usage)?;
    let run = RunDir::new(&a.run.run);
    let (variants, skipped) = experiment::truncate(&run, &levels).map_err(runtime)?;
    print_json(&serde_json::json!({ "variants": variants, "skipped_too_short": skipped }))
}

fn rate_limiter(rate: f64) -> Result<Arc<RateLimiter>, Failure> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(usage(format!("rate limit must be positive, got {rate}")));
    }
    Ok(Arc::new(RateLimiter::new(
        rate.ceil() as u32,
        rate,
        Arc::new(SystemClock::default()),
    )))
}

fn generate(a: GenerateArgs, c: &RunConfig) -> Result<(), Failure> {
    let p = &c.providers;
    let run = RunDir::new(&a.run.run);
    let provider = match a.provider {
        Some(x) => x,
        None => match p.chat.as_deref() {
            None | Some("mock") => ChatProvider::Mock,
            Some("remote") => ChatProvider::Remote,
            Some(other) => {
                return Err(usage(format!("providers.chat: unknown provider {other:?}")))
            }
        },
    };
    let defaults = PromptParams::default();
    let params = PromptParams {
        model_id: pick(a.model, p.chat_model.clone(), defaults.model_id),
        temperature: pick(a.temperature, p.temperature, defaults.temperature),
        max_tokens: pick(a.max_tokens, p.max_tokens, defaults.max_tokens),
    };
    let options = GenerateOptions {
        params,
        parallelism: pick(a.parallelism, p.parallelism, 4),
        failure_ceiling: pick(a.failure_ceiling, p.failure_ceiling, 0.02),
    };
    if options.parallelism == 0 {
        return Err(usage("parallelism must be at least 1"));
    }
    let client = match provider {
        ChatProvider::Mock => {
            let path = pick(a.recorded.map(Some), p.recorded.clone().map(Some), None)
                .ok_or_else(|| usage("the mock provider needs --recorded"))?;
            let recorded = load_recorded(&path).map_err(runtime)?;
            ChatClient::new(Arc::new(MockChat::new(recorded)))
        }
        ChatProvider::Remote => {
            let endpoint = pick(
                a.endpoint.map(Some),
                p.chat_endpoint.clone().map(Some),
                None,
            )
            .ok_or_else(|| usage("the remote provider needs --endpoint"))?;
            let backend = RemoteChat::from_env("openai-compatible", &endpoint).map_err(runtime)?;
            let cache_dir = pick(a.cache_dir, p.cache_dir.clone(), run.cache_dir());
            ChatClient::new(Arc::new(backend) as Arc<dyn ChatBackend>)
                .with_cache(ResponseCache::new(cache_dir))
                .with_rate_limiter(rate_limiter(pick(a.rate_limit, p.rate_limit, 2.0))?)
        }
    };
    let summary = experiment::generate(&run, &client, &options).map_err(runtime)?;
    print_json(&summary)
}

fn score(a: ScoreArgs, c: &RunConfig) -> Result<(), Failure> {
    let p = &c.providers;
    let run = RunDir::new(&a.run.run);
    let kind = match a.embedder {
        Some(k) => k,
        None => match p.embedder.as_deref() {
            None | Some("deterministic") => EmbedderKind::Deterministic,
            Some("remote") => EmbedderKind::Remote,
            Some(other) => {
                return Err(usage(format!(
                    "providers.embedder: unknown embedder {other:?}"
                )))
            }
        },
    };
    let embedder = match kind {
        EmbedderKind::Deterministic => EmbedClient::deterministic(),
        EmbedderKind::Remote => {
            let endpoint = pick(
                a.embed_endpoint.map(Some),
                p.embed_endpoint.clone().map(Some),
                None,
            )
            .ok_or_else(|| usage("the remote embedder needs --embed-endpoint"))?;
            let model = pick(
                a.embed_model,
                p.embed_model.clone(),
                REFERENCE_EMBED_MODEL.into(),
            );
            let backend = RemoteEmbedder::from_env(&endpoint, &model).map_err(runtime)?;
            EmbedClient::new(Arc::new(backend))
                .with_cache(ResponseCache::new(pick(
                    a.cache_dir,
                    p.cache_dir.clone(),
                    run.cache_dir(),
                )))
                .with_rate_limiter(rate_limiter(pick(a.rate_limit, p.rate_limit, 2.0))?)
        }
    };
    let params = ScoreParams {
        percentile: pick(a.percentile, c.analysis.gold_percentile, 75.0),
        strict: true,
        score_all: pick(a.score_all, c.analysis.score_all, false),
    };
    let n = experiment::score(&run, &embedder, &params).map_err(runtime)?;
    print_json(&serde_json::json!({ "scores": n, "embedder": embedder.embedder_id() }))
}

fn analyze(a: AnalyzeArgs, c: &RunConfig) -> Result<(), Failure> {
    let params = AnalyzeParams {
        percentile: pick(a.percentile, c.analysis.gold_percentile, 75.0),
        strict: true,
        theta: a.theta.or(c.analysis.theta),
        score_all: pick(a.score_all, c.analysis.score_all, false),
    };
    let run = RunDir::new(&a.run.run);
    let report = experiment::analyze(&run, &params).map_err(runtime)?;
    print_json(&serde_json::json!({
        "gold": report.gold,
        "theta": report.theta,
        "retained": report.retained,
    }))
}

fn train(a: TrainArgs, c: &RunConfig) -> Result<(), Failure> {
    let k = &c.classifier;
    let d = TrainConfig::default();
    let config = TrainConfig {
        learning_rate: pick(a.learning_rate, k.learning_rate, d.learning_rate),
        l2: pick(a.l2, k.l2, d.l2),
        epochs: pick(a.epochs, k.epochs, d.epochs),
        batch_size: pick(a.batch_size, k.batch_size, d.batch_size),
        seed: pick(a.seed, c.seed, d.seed),
        split: pick(a.split, k.split, d.split),
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let (instances, provenance, default_out): (
        Vec<Instance>,
        Option<LabelProvenance>,
        Option<PathBuf>,
    ) = match (&a.run, a.synthetic) {
        (Some(dir), None) => {
            let run = RunDir::new(dir);
            let corpus = run.corpus().map_err(runtime)?;
            let labels = run.labels().map_err(runtime)?;
            let include_full = pick(a.include_full, k.include_full, true);
            let set = build_training_set(&corpus, &labels, include_full).map_err(runtime)?;
            let instances = set
                .iter()
                .map(|p| p.to_instance())
                .collect::<Result<_, _>>()
                .map_err(runtime)?;
            let manifest = run.manifest().map_err(runtime)?;
            let provenance = manifest.theta.map(|theta| LabelProvenance {
                theta,
                run_id: manifest.run_id.clone(),
            });
            (instances, provenance, Some(run.path("model.json")))
        }
        (None, Some(n)) => (
            completeness::synthetic::prefix_instances(n, config.seed),
            None,
            None,
        ),
        _ => return Err(usage("train needs exactly one of --run or --synthetic")),
    };
    let out = a
        .out
        .or(default_out)
        .ok_or_else(|| usage("train --synthetic needs --out"))?;
    let (train_set, held_out) = completeness::split(&instances, config.split, config.seed);
    let mut model = completeness::train(&train_set, &config).map_err(runtime)?;
    model.label_provenance = provenance;
    let metrics = if held_out.is_empty() {
        None
    } else {
        Some(completeness::evaluate(&model, &held_out).map_err(runtime)?)
    };
    model.save(&out).map_err(runtime)?;
    print_json(&serde_json::json!({
        "model": out,
        "train_instances": train_set.len(),
        "held_out_instances": held_out.len(),
        "held_out": metrics,
    }))
}

fn classify(a: ClassifyArgs, c: &RunConfig) -> Result<(), Failure> {
    let cutoff = pick(a.cutoff, c.classifier.cutoff, DEFAULT_CUTOFF);
    let model = CompletenessModel::load(&a.model).map_err(runtime)?;
    if !a.stream {
        let text = a.text.join(" ");
        let score = predict(&model, &text).map_err(runtime)?;
        // Validates the cutoff the same way the incremental path does.
        IncrementalClassifier::new(&model, cutoff).map_err(|e| usage(e.to_string()))?;
        return print_json(
            &serde_json::json!({ "prefix": text, "score": score, "complete": score >= cutoff }),
        );
    }
    let mut inc = IncrementalClassifier::new(&model, cutoff).map_err(|e| usage(e.to_string()))?;
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line.map_err(runtime)?;
        for word in line.split_whitespace() {
            let already = inc.fired_at().is_some();
            let score = inc.push(word);
            let record = serde_json::json!({
                "index": inc.scores().len(),
                "word": word,
                "score": score,
                "fired": !already && inc.fired_at().is_some(),
            });
            writeln!(out, "{record}").map_err(runtime)?;
        }
        out.flush().map_err(runtime)?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs, c: &RunConfig) -> Result<(), Failure> {
    let s = &c.simulator;
    let name = pick(a.profile, s.profile.clone(), "paper-groq".into());
    let mut profile = LatencyProfile::resolve(&name).map_err(|e| usage(e.to_string()))?;
    if let Some(seed) = a.seed.or(c.seed) {
        profile.seed = seed;
    }
    let policy = match a.policy {
        PolicyKind::Serial => TurnPolicy::Serial,
        PolicyKind::Eager => TurnPolicy::Eager { k: a.k },
        PolicyKind::Filler => {
            let path = a
                .model
                .ok_or_else(|| usage("the filler policy needs --model"))?;
            let model = CompletenessModel::load(&path).map_err(runtime)?;
            TurnPolicy::Filler {
                model: Some(Arc::new(model)),
                cutoff: pick(a.cutoff, c.classifier.cutoff, DEFAULT_CUTOFF),
                filler_latency_ms: pick(
                    a.filler_latency_ms,
                    s.filler_latency_ms,
                    DEFAULT_FILLER_LATENCY_MS,
                ),
            }
        }
    };
    policy.validate().map_err(|e| usage(e.to_string()))?;
    let run = RunDir::new(&a.run.run);
    let corpus = run.corpus().map_err(runtime)?;
    let labels = if run.path("labels.jsonl").is_file() {
        run.labels().map_err(runtime)?
    } else {
        Vec::new()
    };
    let responses = if a.tokens_from_responses {
        Some(run.responses().map_err(runtime)?)
    } else {
        None
    };
    let tokens = pick(a.response_tokens, s.response_tokens, 60);
    let turns = turnsim::build_turns(&corpus, &labels, responses.as_deref(), tokens);
    let report = turnsim::run_policy(&turns, &policy, &profile, a.limit).map_err(runtime)?;
    let out = a.out.unwrap_or_else(|| run.path("simulation"));
    std::fs::create_dir_all(&out).map_err(runtime)?;
    let stem = format!(
        "{}-{}",
        report.policy,
        Path::new(&profile.name)
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
    );
    write_file(&out.join(format!("{stem}.json")), report.to_json() + "\n")?;
    write_file(&out.join(format!("{stem}.csv")), report.to_csv())?;
    print_json(&serde_json::json!({
        "policy": report.policy,
        "profile": report.profile,
        "n_turns": report.n_turns,
        "failures": report.failures.len(),
        "mean_gap_ms": report.mean_gap_ms,
        "sd_gap_ms": report.sd_gap_ms,
        "fraction_in_window": report.fraction_in_window,
        "filler_rate": report.filler_rate,
        "prefix_answer_rate": report.prefix_answer_rate,
        "expected_quality_loss": report.expected_quality_loss,
    }))
}

fn write_file(path: &Path, body: String) -> Result<(), Failure> {
    crate::jsonl::write_atomic(path, body.as_bytes())
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    if a.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    let run = RunDir::new(&a.run.run);
    let written = emit_report(&run, a.format, a.bins).map_err(runtime)?;
    let mut out = std::io::stdout().lock();
    for p in written {
        writeln!(out, "{}", p.display()).map_err(runtime)?;
    }
    Ok(())
}
