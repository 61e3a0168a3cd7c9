//! Command-line surface: eight subcommands driving the pipeline end to end.
//!
//! All commands share one TOML run configuration ([`RunConfig`]); flags win
//! over the file, and every command that writes results echoes the fully
//! resolved configuration into the output directory as `resolved.toml` for
//! provenance. Identical inputs, seed, and cache produce byte-identical
//! outputs, so any run can be reproduced by rerunning the command.
//!
//! Exit codes are part of the contract:
//!
//! | code | meaning                                                      |
//! |------|--------------------------------------------------------------|
//! | 0    | success                                                      |
//! | 2    | input validation failure (corpus, benchmark, config, model)  |
//! | 3    | runtime data error (infeasible build, missing truth, provider) |
//! | 64   | usage error (unknown flags, bad grid syntax, bad threshold)  |
//!
//! The API credential is only ever read from the environment variable named
//! by `provider.api_key_env` (default `XCLONE_API_KEY`); there is no flag
//! for it, and cached responses are served without one.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConfigError, RunConfig};
use crate::corpus::{self, CorpusError, LanguageRegistry};
use crate::detectors::{
    self, ClassifierKind, ClassifierModel, DetectorError, LlmOptions, Prediction,
};
use crate::eval::{self, EvalError, LearnerSpec};
use crate::ml::{svm_train_diagnostic, KernelConfig, KnnBackend, KnnModel, MlError, SvmParams};
use crate::pairing::{self, PairLabel, PairingError};
use crate::prompts::{ExplanationVariant, PromptKind};
use crate::providers::{
    ChatClient, ChatMessage, EmbeddingClient, ProviderError, ResponseCache,
};
use crate::testkit::{self, MockChat, MockEmbedder, MockServer, SyntheticSpec, TestkitError};

/// Run the CLI against `std::env::args` and return the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders help/version on stdout and errors on stderr.
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

// ------------------------------------------------------------------ errors

/// A command failure carrying its exit code.
#[derive(Debug, thiserror::Error)]
enum CliError {
    /// Flag or argument misuse (exit 64).
    #[error("{0}")]
    Usage(String),
    /// Input data failed validation (exit 2).
    #[error("{0}")]
    Validation(String),
    /// Runtime data or environment error (exit 3).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<MlError> for CliError {
    fn from(e: MlError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<PairingError> for CliError {
    fn from(e: PairingError) -> Self {
        match e {
            PairingError::MalformedRecord(_)
            | PairingError::DuplicatePairId(_)
            | PairingError::InvalidConfig(_) => CliError::Validation(e.to_string()),
            PairingError::InsufficientProblems { .. } | PairingError::ImbalancedBenchmark { .. } => {
                CliError::Runtime(e.to_string())
            }
            PairingError::Corpus(inner) => inner.into(),
            PairingError::Ml(inner) => inner.into(),
            PairingError::Provider(inner) => inner.into(),
            PairingError::Io(inner) => inner.into(),
        }
    }
}

impl From<DetectorError> for CliError {
    fn from(e: DetectorError) -> Self {
        match e {
            DetectorError::BadThreshold { .. } => CliError::Usage(e.to_string()),
            DetectorError::MalformedRecord(_) => CliError::Validation(e.to_string()),
            DetectorError::MissingEmbedding { .. } => CliError::Runtime(e.to_string()),
            DetectorError::Ml(inner) => inner.into(),
            DetectorError::Provider(inner) => inner.into(),
            DetectorError::Io(inner) => inner.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::EmptyGrid | EvalError::NonMonotoneGrid(_) | EvalError::BadFoldCount(_) => {
                CliError::Usage(e.to_string())
            }
            EvalError::MissingGroundTruth(_) | EvalError::TooFewPerClass { .. } => {
                CliError::Runtime(e.to_string())
            }
            EvalError::Detector(inner) => inner.into(),
            EvalError::Ml(inner) => inner.into(),
        }
    }
}

impl From<TestkitError> for CliError {
    fn from(e: TestkitError) -> Self {
        match e {
            // Synthetic specs only ever come from flags here.
            TestkitError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            TestkitError::RejectionOverflow { .. } => CliError::Runtime(e.to_string()),
            TestkitError::Corpus(inner) => inner.into(),
            TestkitError::Io(inner) => inner.into(),
        }
    }
}

// ------------------------------------------------------------- arguments

#[derive(Parser)]
#[command(
    name = "xclone",
    version,
    about = "Cross-lingual code clone detection: benchmarks, detectors, reports"
)]
struct Cli {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Top-level seed, propagated to pairing and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for reports, models, and the resolved config echo.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Provider base URL override (e.g. a local mock server).
    #[arg(long, global = true, value_name = "URL")]
    base_url: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file and print a summary.
    Ingest {
        /// Corpus JSONL file.
        corpus: PathBuf,
    },
    /// Build a balanced clone/non-clone benchmark from a corpus.
    BuildPairs(BuildPairsArgs),
    /// Run one detection backend over a benchmark.
    Detect(DetectArgs),
    /// Train a classifier on a benchmark and save the model.
    Train(TrainArgs),
    /// Score predictions against a benchmark, or cross-validate a learner.
    Evaluate(EvaluateArgs),
    /// Sweep a decision threshold over recorded scores.
    Sweep(SweepArgs),
    /// Generate a synthetic corpus with known latent geometry.
    GenCorpus(GenCorpusArgs),
    /// Serve mock embedding/chat providers over HTTP for offline runs.
    MockServer(MockServerArgs),
}

#[derive(Args)]
struct BuildPairsArgs {
    /// Corpus to read (default: the configured corpus_path).
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Benchmark file to write (default: the configured benchmark_path).
    #[arg(long, value_name = "FILE")]
    benchmark: Option<PathBuf>,
    /// Pairs to build per label.
    #[arg(long)]
    pairs_per_label: Option<usize>,
    /// Anchor language (side A of every pair).
    #[arg(long)]
    anchor: Option<String>,
    /// Comma-separated partner languages, replacing the configured list.
    #[arg(long, value_delimiter = ',')]
    partners: Option<Vec<String>>,
    /// DBSCAN neighbourhood radius in cosine distance.
    #[arg(long)]
    eps: Option<f64>,
    /// DBSCAN core-point threshold.
    #[arg(long)]
    min_pts: Option<usize>,
    /// Times one problem may serve as a non-clone partner.
    #[arg(long)]
    max_partner_uses: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Cosine,
    Llm,
    Classifier,
}

#[derive(Args)]
struct DetectArgs {
    /// Detection backend.
    #[arg(long, value_enum)]
    backend: BackendArg,
    /// Prompt protocol (llm backend).
    #[arg(long, value_parser = parse_prompt_kind, value_name = "KIND")]
    prompt: Option<PromptKind>,
    /// Analysis flavour for the separate_explanation protocol.
    #[arg(long, value_parser = parse_variant, value_name = "VARIANT")]
    variant: Option<ExplanationVariant>,
    /// Decision threshold: cosine similarity in [-1, 1], or the 0–10
    /// similarity-score cut for the llm backend.
    #[arg(long)]
    threshold: Option<f64>,
    /// Trained model file (classifier backend).
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Benchmark to read (default: the configured benchmark_path).
    #[arg(long, value_name = "FILE")]
    benchmark: Option<PathBuf>,
    /// Predictions file to write (default: out_dir/predictions-<backend>.jsonl).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    Svm,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum KnnBackendArg {
    Brute,
    KdTree,
}

impl From<KnnBackendArg> for KnnBackend {
    fn from(arg: KnnBackendArg) -> Self {
        match arg {
            KnnBackendArg::Brute => KnnBackend::Brute,
            KnnBackendArg::KdTree => KnnBackend::KdTree,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Learner family.
    #[arg(long, value_enum)]
    learner: LearnerArg,
    /// Benchmark to read (default: the configured benchmark_path).
    #[arg(long, value_name = "FILE")]
    benchmark: Option<PathBuf>,
    /// Model file to write (default: out_dir/model-<family>.json).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// SVM box constraint C.
    #[arg(long)]
    c: Option<f64>,
    /// SVM kernel: linear, poly, or rbf.
    #[arg(long)]
    kernel: Option<String>,
    /// Polynomial degree.
    #[arg(long)]
    degree: Option<u32>,
    /// Kernel γ (poly/rbf); defaults to a data-dependent scale.
    #[arg(long)]
    gamma: Option<f64>,
    /// Polynomial additive constant.
    #[arg(long)]
    coef0: Option<f64>,
    /// Neighbours for k-NN.
    #[arg(long)]
    k: Option<usize>,
    /// k-NN search backend.
    #[arg(long, value_enum)]
    knn_backend: Option<KnnBackendArg>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["predictions", "cv"])))]
struct EvaluateArgs {
    /// Predictions JSONL to score against the benchmark.
    #[arg(long, value_name = "FILE")]
    predictions: Option<PathBuf>,
    /// Cross-validate the configured learner with k folds (configured
    /// fold count when K is omitted).
    #[arg(long, value_name = "K", num_args = 0..=1)]
    cv: Option<Option<usize>>,
    /// Add one metrics row per partner language.
    #[arg(long)]
    by_language: bool,
    /// Benchmark to read (default: the configured benchmark_path).
    #[arg(long, value_name = "FILE")]
    benchmark: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Scores file: a JSON object {"pair_id": score, …} or a predictions
    /// JSONL whose lines carry raw scores.
    #[arg(long, value_name = "FILE")]
    scores: PathBuf,
    /// Threshold grid as a:b:step, inclusive of both endpoints.
    #[arg(long, value_name = "A:B:STEP")]
    grid: String,
    /// Benchmark to read (default: the configured benchmark_path).
    #[arg(long, value_name = "FILE")]
    benchmark: Option<PathBuf>,
}

/// Synthetic-corpus shape, shared by `gen-corpus` and `mock-server`.
#[derive(Args)]
struct SynthArgs {
    /// Problems to generate.
    #[arg(long, default_value_t = 100)]
    problems: usize,
    /// Comma-separated languages; every problem gets one sample per language.
    #[arg(long, value_delimiter = ',', default_value = "java,python,cpp")]
    languages: Vec<String>,
    /// Latent dimensionality.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Mock-embedding noise scale σ.
    #[arg(long, default_value_t = 0.02)]
    sigma: f64,
    /// Minimum pairwise cosine distance between problem latents.
    #[arg(long, default_value_t = 0.08)]
    margin: f64,
}

impl SynthArgs {
    fn into_spec(self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_problems: self.problems,
            languages: self.languages,
            dim: self.dim,
            noise_sigma: self.sigma,
            margin: self.margin,
            seed,
        }
    }
}

#[derive(Args)]
struct GenCorpusArgs {
    #[command(flatten)]
    synth: SynthArgs,
    /// Corpus file to write (default: the configured corpus_path).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MockServerArgs {
    #[command(flatten)]
    synth: SynthArgs,
    /// TCP port (0 picks an ephemeral one).
    #[arg(long, default_value_t = 0)]
    port: u16,
    /// Fraction of chat responses replaced with undecidable text.
    #[arg(long, default_value_t = 0.0)]
    chaos: f64,
    /// Fixed extra latency per request, in milliseconds.
    #[arg(long, default_value_t = 0)]
    latency_ms: u64,
    /// Also write the backing corpus JSONL here.
    #[arg(long, value_name = "FILE")]
    write_corpus: Option<PathBuf>,
}

fn parse_prompt_kind(s: &str) -> Result<PromptKind, String> {
    PromptKind::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = PromptKind::all().iter().map(|k| k.name()).collect();
        format!("unknown prompt kind `{s}` (expected one of: {})", names.join(", "))
    })
}

fn parse_variant(s: &str) -> Result<ExplanationVariant, String> {
    match s {
        "similarity" => Ok(ExplanationVariant::Similarity),
        "reasoning" => Ok(ExplanationVariant::Reasoning),
        "difference" => Ok(ExplanationVariant::Difference),
        "integrated" => Ok(ExplanationVariant::Integrated),
        other => Err(format!(
            "unknown explanation variant `{other}` (expected similarity, reasoning, difference, or integrated)"
        )),
    }
}

// ------------------------------------------------------------- execution

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out_dir) = cli.out_dir {
        config.out_dir = out_dir;
    }
    if let Some(base_url) = cli.base_url {
        config.provider.base_url = base_url;
    }
    config.propagate_seed();

    match cli.command {
        Command::Ingest { corpus } => cmd_ingest(&corpus),
        Command::BuildPairs(args) => cmd_build_pairs(&mut config, args),
        Command::Detect(args) => cmd_detect(&mut config, args),
        Command::Train(args) => cmd_train(&mut config, args),
        Command::Evaluate(args) => cmd_evaluate(&config, args),
        Command::Sweep(args) => cmd_sweep(&config, args),
        Command::GenCorpus(args) => cmd_gen_corpus(&config, args),
        Command::MockServer(args) => cmd_mock_server(&config, args),
    }
}

fn open_cache(config: &RunConfig) -> Result<Arc<ResponseCache>, CliError> {
    Ok(Arc::new(ResponseCache::open(&config.cache_path)?))
}

/// Create the directory an output file is about to be written into.
fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn cmd_ingest(path: &Path) -> Result<(), CliError> {
    let registry = LanguageRegistry::default();
    let problems = corpus::load_corpus(path, &registry)?;

    let mut samples = 0usize;
    let mut by_language: BTreeMap<&str, usize> = BTreeMap::new();
    for problem in &problems {
        for sample in &problem.samples {
            *by_language.entry(sample.language.as_str()).or_insert(0) += 1;
            samples += 1;
        }
    }
    let mut by_complexity: BTreeMap<usize, usize> = BTreeMap::new();
    for problem in &problems {
        *by_complexity.entry(corpus::problem_complexity(problem)?).or_insert(0) += 1;
    }

    println!("problems: {}", problems.len());
    println!("accepted samples: {samples}");
    println!();
    println!("{:<12} {:>8}", "language", "samples");
    for (language, n) in &by_language {
        println!("{language:<12} {n:>8}");
    }
    println!();
    println!("{:<12} {:>8}", "complexity", "problems");
    for (complexity, n) in &by_complexity {
        println!("{complexity:<12} {n:>8}");
    }
    Ok(())
}

fn cmd_build_pairs(config: &mut RunConfig, args: BuildPairsArgs) -> Result<(), CliError> {
    if let Some(v) = args.pairs_per_label {
        config.pairing.pairs_per_label = v;
    }
    if let Some(v) = args.anchor {
        config.pairing.anchor_language = v;
    }
    if let Some(v) = args.partners {
        config.pairing.partner_languages = v;
    }
    if let Some(v) = args.eps {
        config.pairing.dbscan_eps = v;
    }
    if let Some(v) = args.min_pts {
        config.pairing.dbscan_min_pts = v;
    }
    if let Some(v) = args.max_partner_uses {
        config.pairing.max_partner_uses = v;
    }
    let corpus_path = args.corpus.unwrap_or_else(|| config.corpus_path.clone());
    let benchmark_path = args.benchmark.unwrap_or_else(|| config.benchmark_path.clone());

    let registry = LanguageRegistry::default();
    let problems = corpus::load_corpus(&corpus_path, &registry)?;
    let embedder = EmbeddingClient::new(&config.provider, open_cache(config)?)?;
    let build = pairing::build_benchmark(&problems, &embedder, &config.pairing)?;
    ensure_parent(&benchmark_path)?;
    pairing::write_benchmark(&build.pairs, &benchmark_path, config.seed)?;

    config.echo_into_out_dir()?;
    let log = serde_json::json!({
        "clusters": build.clustering.clusters,
        "noise": build.clustering.noise,
        "warnings": build.warnings,
        "pairs": build.pairs.len(),
    });
    let log_path = config.out_dir.join("pairing-log.json");
    fs::write(&log_path, format!("{log:#}\n"))?;

    let clones = build.pairs.iter().filter(|p| p.label == PairLabel::Clone).count();
    println!(
        "wrote {} pairs ({clones} clone / {} non-clone) to {}",
        build.pairs.len(),
        build.pairs.len() - clones,
        benchmark_path.display()
    );
    println!(
        "{} clusters, {} noise problems; provenance: {}",
        build.clustering.clusters.len(),
        build.clustering.noise.len(),
        log_path.display()
    );
    for warning in &build.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn cmd_detect(config: &mut RunConfig, args: DetectArgs) -> Result<(), CliError> {
    if let Some(kind) = args.prompt {
        config.detector.prompt = kind;
    }
    if let Some(variant) = args.variant {
        config.detector.variant = variant;
    }
    if let Some(threshold) = args.threshold {
        match args.backend {
            BackendArg::Cosine => config.detector.cosine_threshold = threshold,
            BackendArg::Llm => config.detector.score_threshold = threshold,
            BackendArg::Classifier => {
                return Err(CliError::Usage(
                    "--threshold does not apply to the classifier backend".into(),
                ))
            }
        }
    }
    let benchmark_path = args.benchmark.unwrap_or_else(|| config.benchmark_path.clone());
    let pairs = pairing::load_benchmark(&benchmark_path)?;
    let cache = open_cache(config)?;

    let (predictions, slug) = match args.backend {
        BackendArg::Cosine => {
            let embedder = EmbeddingClient::new(&config.provider, cache)?;
            let predictions =
                detectors::cosine_detect_all(&pairs, &embedder, config.detector.cosine_threshold)?;
            (predictions, "cosine".to_string())
        }
        BackendArg::Llm => {
            let client = ChatClient::new(&config.provider, cache)?;
            let options = LlmOptions {
                variant: config.detector.variant,
                score_threshold: config.detector.score_threshold,
                fallback: config.detector.fallback,
            };
            let kind = config.detector.prompt;
            let mut chat = |messages: &[ChatMessage]| {
                client.chat(&client.request_messages(messages.to_vec())).map(|r| r.content)
            };
            let predictions = detectors::llm_detect_all(&pairs, kind, &options, &mut chat);
            (predictions, format!("llm-{}", kind.name()))
        }
        BackendArg::Classifier => {
            let model_path = args
                .model
                .ok_or_else(|| CliError::Usage("--model is required with --backend classifier".into()))?;
            let model = load_model(&model_path)?;
            let embedder = EmbeddingClient::new(&config.provider, cache)?;
            let slug = match model.kind() {
                ClassifierKind::Svm => "classifier-svm",
                ClassifierKind::Knn => "classifier-knn",
            };
            let predictions = detectors::classifier_detect_all(&pairs, &embedder, &model)?;
            (predictions, slug.to_string())
        }
    };

    config.echo_into_out_dir()?;
    let out_path =
        args.out.unwrap_or_else(|| config.out_dir.join(format!("predictions-{slug}.jsonl")));
    ensure_parent(&out_path)?;
    detectors::write_predictions(&predictions, &out_path)?;
    let undecided = predictions.iter().filter(|p| p.undecided).count();
    println!(
        "wrote {} predictions ({undecided} undecided) to {}",
        predictions.len(),
        out_path.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<ClassifierModel, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read model {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("malformed model {}: {e}", path.display())))
}

fn cmd_train(config: &mut RunConfig, args: TrainArgs) -> Result<(), CliError> {
    apply_learner_overrides(config, &args)?;
    let benchmark_path = args.benchmark.unwrap_or_else(|| config.benchmark_path.clone());
    let pairs = pairing::load_benchmark(&benchmark_path)?;
    let embedder = EmbeddingClient::new(&config.provider, open_cache(config)?)?;
    let embeddings = detectors::embed_pair_sides(&pairs, &embedder)?;
    let (features, labels) = detectors::featurize_pairs(&pairs, &embeddings)?;

    let (model, summary) = match &config.learner {
        LearnerSpec::Svm(params) => {
            let labels: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
            let (model, diag) = svm_train_diagnostic(&features, &labels, params)?;
            let max_residual = diag.kkt_residuals.iter().copied().fold(0.0, f64::max);
            let summary = format!(
                "svm: {} support vectors / {} pairs, bias {:.6}, {} passes, max KKT residual {max_residual:.2e}",
                model.support_vectors.len(),
                features.len(),
                model.bias,
                diag.passes,
            );
            (ClassifierModel::Svm(model), summary)
        }
        LearnerSpec::Knn { k, backend } => {
            let model = KnnModel::fit(features.clone(), labels.clone(), *k, *backend)?;
            let backend_name = match backend {
                KnnBackend::Brute => "brute",
                KnnBackend::KdTree => "kd-tree",
            };
            let summary =
                format!("knn: {} training pairs, k = {k}, {backend_name} search", features.len());
            (ClassifierModel::Knn(model), summary)
        }
    };

    config.echo_into_out_dir()?;
    let slug = match model.kind() {
        ClassifierKind::Svm => "svm",
        ClassifierKind::Knn => "knn",
    };
    let out_path = args.out.unwrap_or_else(|| config.out_dir.join(format!("model-{slug}.json")));
    let json = serde_json::to_string_pretty(&model).expect("model serializes");
    ensure_parent(&out_path)?;
    fs::write(&out_path, json + "\n")?;
    println!("{summary}");
    println!("wrote model to {}", out_path.display());
    Ok(())
}

/// Rebuild `config.learner` from the `train` flags; flags win over the file.
fn apply_learner_overrides(config: &mut RunConfig, args: &TrainArgs) -> Result<(), CliError> {
    match args.learner {
        LearnerArg::Svm => {
            let mut params = match &config.learner {
                LearnerSpec::Svm(params) => *params,
                LearnerSpec::Knn { .. } => SvmParams { seed: config.seed, ..SvmParams::default() },
            };
            if let Some(c) = args.c {
                params.c = c;
            }
            if let Some(kind) = &args.kernel {
                params.kernel = match kind.as_str() {
                    "linear" => KernelConfig::Linear,
                    "poly" | "polynomial" => KernelConfig::Polynomial {
                        degree: args.degree.unwrap_or(3),
                        gamma: args.gamma,
                        coef0: args.coef0.unwrap_or(0.0),
                    },
                    "rbf" => KernelConfig::Rbf { gamma: args.gamma },
                    other => {
                        return Err(CliError::Usage(format!(
                            "unknown kernel `{other}` (expected linear, poly, or rbf)"
                        )))
                    }
                };
            } else if args.degree.is_some() || args.gamma.is_some() || args.coef0.is_some() {
                params.kernel = match params.kernel {
                    KernelConfig::Linear => KernelConfig::Linear,
                    KernelConfig::Polynomial { degree, gamma, coef0 } => KernelConfig::Polynomial {
                        degree: args.degree.unwrap_or(degree),
                        gamma: args.gamma.or(gamma),
                        coef0: args.coef0.unwrap_or(coef0),
                    },
                    KernelConfig::Rbf { gamma } => {
                        KernelConfig::Rbf { gamma: args.gamma.or(gamma) }
                    }
                };
            }
            config.learner = LearnerSpec::Svm(params);
        }
        LearnerArg::Knn => {
            let (mut k, mut backend) = match &config.learner {
                LearnerSpec::Knn { k, backend } => (*k, *backend),
                LearnerSpec::Svm(_) => (5, KnnBackend::KdTree),
            };
            if let Some(v) = args.k {
                k = v;
            }
            if let Some(v) = args.knn_backend {
                backend = v.into();
            }
            config.learner = LearnerSpec::Knn { k, backend };
        }
    }
    Ok(())
}

fn cmd_evaluate(config: &RunConfig, args: EvaluateArgs) -> Result<(), CliError> {
    let benchmark_path =
        args.benchmark.clone().unwrap_or_else(|| config.benchmark_path.clone());
    let pairs = pairing::load_benchmark(&benchmark_path)?;

    let (report, stem, predictions): (_, _, Option<Vec<Prediction>>) =
        if let Some(path) = &args.predictions {
            let predictions = detectors::load_predictions(path)?;
            let report = eval::compute_metrics(&predictions, &pairs)?;
            (report, "report", Some(predictions))
        } else {
            let k = args.cv.flatten().unwrap_or(config.eval.cv_folds);
            let embedder = EmbeddingClient::new(&config.provider, open_cache(config)?)?;
            let embeddings = detectors::embed_pair_sides(&pairs, &embedder)?;
            let report =
                eval::cross_validate(&pairs, &embeddings, &config.learner, k, config.seed)?;
            (report, "cv-report", None)
        };

    config.echo_into_out_dir()?;
    let json_path = config.out_dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&json_path, json + "\n")?;
    let md_path = config.out_dir.join(format!("{stem}.md"));
    fs::write(&md_path, eval::render_report_markdown(&report, args.by_language))?;
    if let Some(predictions) = &predictions {
        fs::write(config.out_dir.join("predictions.csv"), eval::predictions_to_csv(predictions))?;
    }
    print!("{}", eval::render_report_table(&report, args.by_language));
    println!("wrote {} and {}", json_path.display(), md_path.display());
    Ok(())
}

fn cmd_sweep(config: &RunConfig, args: SweepArgs) -> Result<(), CliError> {
    let grid = parse_grid(&args.grid)?;
    let benchmark_path = args.benchmark.unwrap_or_else(|| config.benchmark_path.clone());
    let pairs = pairing::load_benchmark(&benchmark_path)?;
    let scores = load_scores(&args.scores)?;
    let sweep = eval::sweep_threshold(&scores, &pairs, &grid)?;

    config.echo_into_out_dir()?;
    let json_path = config.out_dir.join("sweep.json");
    let json = serde_json::to_string_pretty(&sweep).expect("sweep serializes");
    fs::write(&json_path, json + "\n")?;
    fs::write(config.out_dir.join("sweep.md"), eval::render_sweep_markdown(&sweep))?;
    print!("{}", eval::render_sweep_table(&sweep));
    Ok(())
}

/// Parse `a:b:step` into the inclusive grid `a, a+step, …` up to `b`.
fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let usage = || CliError::Usage(format!("--grid `{spec}` is not of the form a:b:step"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(usage());
    }
    let mut values = [0.0f64; 3];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| usage())?;
    }
    let [a, b, step] = values;
    if !a.is_finite() || !b.is_finite() || !step.is_finite() || step <= 0.0 || b < a {
        return Err(CliError::Usage(format!(
            "--grid `{spec}` needs finite a ≤ b and step > 0"
        )));
    }
    // The epsilon absorbs float error so 0:1:0.05 yields exactly 21 points.
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| a + i as f64 * step).collect())
}

/// Read scores either as a JSON object keyed by pair id or as a predictions
/// JSONL where every line carries a raw score.
fn load_scores(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read scores {}: {e}", path.display())))?;
    // A predictions JSONL line is itself a JSON object, so sniffing on the
    // first byte can't tell the formats apart; only a {"id": number, …}
    // parse of the whole file does.
    if let Ok(scores) = serde_json::from_str::<BTreeMap<String, f64>>(&text) {
        return Ok(scores);
    }
    let predictions = detectors::load_predictions(path)?;
    let mut scores = BTreeMap::new();
    for prediction in predictions {
        let score = prediction.raw_score.ok_or_else(|| {
            CliError::Validation(format!("prediction {} carries no raw score", prediction.pair_id))
        })?;
        if scores.insert(prediction.pair_id.clone(), score).is_some() {
            return Err(CliError::Validation(format!(
                "duplicate pair id `{}` in scores file",
                prediction.pair_id
            )));
        }
    }
    Ok(scores)
}

fn cmd_gen_corpus(config: &RunConfig, args: GenCorpusArgs) -> Result<(), CliError> {
    let spec = args.synth.into_spec(config.seed);
    let corpus = testkit::generate_corpus(&spec)?;
    let out = args.out.unwrap_or_else(|| config.corpus_path.clone());
    ensure_parent(&out)?;
    fs::write(&out, &corpus.jsonl)?;
    println!(
        "wrote {} problems × {} languages to {}",
        corpus.problems.len(),
        spec.languages.len(),
        out.display()
    );
    Ok(())
}

fn cmd_mock_server(config: &RunConfig, args: MockServerArgs) -> Result<(), CliError> {
    let spec = args.synth.into_spec(config.seed);
    let corpus = testkit::generate_corpus(&spec)?;
    if let Some(path) = &args.write_corpus {
        fs::write(path, &corpus.jsonl)?;
        println!("wrote corpus to {}", path.display());
    }
    let embedder = MockEmbedder::for_corpus(&corpus);
    let chat = MockChat::new(args.chaos, spec.seed);
    let server = MockServer::start_on(embedder, chat, args.port)?;
    if args.latency_ms > 0 {
        server.set_latency(Duration::from_millis(args.latency_ms));
    }
    println!(
        "mock provider for {} problems listening on {}",
        corpus.problems.len(),
        server.url()
    );
    println!("point the toolkit at it with --base-url {}", server.url());
    std::io::stdout().flush()?;
    // Runs until the process is killed; every request is served from the
    // seeded mocks, so there is no state to flush on exit.
    loop {
        std::thread::sleep(Duration::from_secs(3600));
    }
}
