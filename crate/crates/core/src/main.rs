use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use sagnn::dataset::{write_dataset_files, DataError, Dataset};
use sagnn::eval::export::{write_embedding_tsv, write_misclassified_tsv};
use sagnn::eval::trials::{run_trials_with, TrialsError};
use sagnn::eval::{
    bucket_keys, bucket_metrics, evaluate, export_embeddings, export_misclassified_logits, stratified_split,
    Bucketing, EvalError, ExperimentConfig, MetricsReport, Split,
};
use sagnn::graph::{build_graph, read_edge_tsv_file, save_graph, stats, GraphError};
use sagnn::model::{train, Model, ModelError, ModelKind, UserInit};
use sagnn::nn::AggregatorKind;
use sagnn::synth::{degree_report, generate, SynthConfig, SynthError};
use sagnn::weak_label::{
    corpus_edges, expand_lexicon, featurize, label_and_clean, read_corpus, write_corpus, ExpansionConfig,
    FeatureMode, HashtagLexicon, LabelError, RawPost,
};

const EXPERIMENT_FILE: &str = "experiment.json";

#[derive(Parser)]
#[command(name = "sagnn", version, about = "Skip-aggregation GNN for post stance classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weakly label a JSONL corpus with a hashtag lexicon and write a dataset directory.
    Annotate(AnnotateArgs),
    /// Build a binary graph file from an edge list and print its statistics.
    BuildGraph(BuildGraphArgs),
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Train one model and save its best-validation checkpoint.
    Train(TrainArgs),
    /// Evaluate a saved model on one split part.
    Evaluate(EvaluateArgs),
    /// Train and test one model per seed and aggregate the results.
    Trials(TrialsArgs),
    /// Export embeddings or misclassified logits of a saved model.
    Export(ExportArgs),
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    min_cooccur: usize,
    #[arg(long, default_value_t = 0.9)]
    purity: f64,
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    #[arg(long, default_value_t = 256)]
    feature_dim: usize,
    /// Dense features keyed by post id, instead of hashed tokens.
    #[arg(long)]
    features_file: Option<PathBuf>,
}

#[derive(Args)]
struct BuildGraphArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Allow tweets without exactly one post edge.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    num_users: Option<usize>,
    #[arg(long)]
    mean_tweets_per_user: Option<f64>,
    #[arg(long)]
    flip: Option<f64>,
    #[arg(long)]
    retweet_rate: Option<f64>,
    #[arg(long)]
    retweet_exponent: Option<f64>,
    #[arg(long)]
    retweet_cap: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    low_signal_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Experiment flags; each overrides the matching field of `--config`.
#[derive(Args, Clone)]
struct ExperimentArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sagnn | sagnn-noet | baseline | content-only
    #[arg(long)]
    model: Option<String>,
    /// mean | max | sum | wsum
    #[arg(long)]
    agg: Option<String>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long)]
    num_walks: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    /// random | centroid | medoid (baseline user features)
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    baseline_layers: Option<usize>,
    #[arg(long)]
    fanout: Option<usize>,
    #[arg(long)]
    classifier_bias: bool,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    eval_every: Option<u64>,
    /// Train/validation/test fractions, e.g. 0.8,0.1,0.1
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<f64>>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// feature_signal, first_order_degree, second_order_degree
    #[arg(long, value_delimiter = ',')]
    buckets: Option<Vec<String>>,
    /// Upper bounds of the degree buckets, e.g. 5,20
    #[arg(long, value_delimiter = ',')]
    bucket_edges: Option<Vec<usize>>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// train | val | test | all
    #[arg(long, default_value = "test")]
    part: String,
    /// feature_signal, first_order_degree, second_order_degree
    #[arg(long, value_delimiter = ',')]
    buckets: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    bucket_edges: Option<Vec<usize>>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrialsArgs {
    #[arg(long)]
    data: PathBuf,
    /// A comma-separated seed list, or a single count N meaning seeds 0..N.
    #[arg(long)]
    seeds: String,
    /// Directory for per-seed reports and the summary.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Write a stratified sample of embeddings (id, label, z...) here.
    #[arg(long, conflicts_with = "logits", required_unless_present = "logits")]
    embeddings: Option<PathBuf>,
    /// Write logits of misclassified items (id, logit, label) here.
    #[arg(long)]
    logits: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    fraction: f64,
    /// train | val | test | all
    #[arg(long, default_value = "test")]
    part: String,
}

/// Exit code 2 for bad input or configuration, 3 for failures while running.
#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Io(io) => io.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(io) => io.into(),
            DataError::Graph(g) => g.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) | ModelError::Eval(_) | ModelError::EmptySplit(_) | ModelError::IsolatedUser(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<LabelError> for CliError {
    fn from(e: LabelError) -> Self {
        match e {
            LabelError::Io(io) => io.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn parse_buckets(names: &[String]) -> Result<Vec<Bucketing>, CliError> {
    names
        .iter()
        .map(|n| Bucketing::parse(n).ok_or_else(|| invalid(format!("unknown bucketing '{n}'"))))
        .collect()
}

fn experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &args.model {
        cfg.model = ModelKind::parse(m).ok_or_else(|| invalid(format!("unknown model '{m}'")))?;
    }
    if let Some(a) = &args.agg {
        cfg.aggregator = AggregatorKind::parse(a).ok_or_else(|| invalid(format!("unknown aggregator '{a}'")))?;
    }
    if let Some(i) = &args.init {
        cfg.init_strategy = UserInit::parse(i).ok_or_else(|| invalid(format!("unknown init strategy '{i}'")))?;
    }
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { cfg.$field = v; })* };
    }
    set!(layers, dim, epochs, batch_size, lr, weight_decay, warmup_fraction, num_walks, top_k);
    set!(baseline_layers, fanout, threshold, eval_every, seed);
    if args.classifier_bias {
        cfg.classifier_bias = true;
    }
    if let Some(s) = args.split_seed {
        cfg.split_seed = Some(s);
    }
    if let Some(s) = &args.split {
        cfg.split = <[f64; 3]>::try_from(s.as_slice()).map_err(|_| invalid("--split needs three fractions"))?;
    }
    if let Some(b) = &args.buckets {
        cfg.buckets = parse_buckets(b)?;
    }
    if let Some(e) = &args.bucket_edges {
        cfg.bucket_edges = e.clone();
    }
    cfg.model_spec(1, cfg.seed).validate()?;
    Ok(cfg)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || invalid(format!("bad seed list '{s}'"));
    if s.contains(',') {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
    } else {
        let n: u64 = s.trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(invalid("need at least one seed"));
        }
        Ok((0..n).collect())
    }
}

fn load_data(dir: &Path) -> Result<Dataset, CliError> {
    let data = Dataset::load(dir).map_err(|e| match CliError::from(e) {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", dir.display())),
        CliError::Runtime(m) => CliError::Runtime(format!("{}: {m}", dir.display())),
    })?;
    info!(
        "loaded {} posts, {} users, {} edges from {}",
        data.graph.num_tweets(),
        data.graph.num_users(),
        data.graph.num_edges(),
        dir.display()
    );
    Ok(data)
}

fn split_part(split: &Split, part: &str, n: usize) -> Result<Vec<u32>, CliError> {
    Ok(match part {
        "train" => split.train.clone(),
        "val" => split.val.clone(),
        "test" => split.test.clone(),
        "all" => (0..n as u32).collect(),
        other => return Err(invalid(format!("unknown split part '{other}'"))),
    })
}

fn cmd_annotate(a: &AnnotateArgs) -> Result<(), CliError> {
    let posts: Vec<RawPost> = read_corpus(BufReader::new(File::open(&a.corpus)?))?;
    let seed = HashtagLexicon::read_tsv(BufReader::new(File::open(&a.lexicon)?))?;
    let exp = ExpansionConfig {
        min_cooccur: a.min_cooccur,
        purity: a.purity,
        rounds: a.rounds,
    };
    let lexicon = expand_lexicon(&seed, &posts, &exp)?;
    info!("lexicon: {} seed tags, {} after expansion", seed.len(), lexicon.len());
    let (labeled, report) = label_and_clean(&posts, &lexicon)?;
    if labeled.is_empty() {
        return Err(invalid("no post survived labeling"));
    }
    let features = match &a.features_file {
        Some(p) => featurize(&labeled, &FeatureMode::ExternalFile(p))?,
        None => featurize(&labeled, &FeatureMode::HashedTokens { dim: a.feature_dim })?,
    };
    let ids: Vec<String> = labeled.iter().map(|p| p.id.clone()).collect();
    let labels: Vec<u8> = labeled.iter().map(|p| p.label).collect();
    write_dataset_files(&a.out, &ids, &labels, &features, &corpus_edges(&labeled), None)?;
    let mut w = BufWriter::new(File::create(a.out.join("lexicon.tsv"))?);
    lexicon.write_tsv(&mut w)?;
    w.flush()?;
    let cleaned: Vec<RawPost> = labeled
        .iter()
        .map(|p| RawPost {
            id: p.id.clone(),
            text: p.text.clone(),
            author: p.author.clone(),
            retweeters: p.retweeters.clone(),
            timestamp: None,
            retweet_of: None,
        })
        .collect();
    let mut w = BufWriter::new(File::create(a.out.join("cleaned.jsonl"))?);
    write_corpus(&mut w, &cleaned)?;
    w.flush()?;
    write_json(&a.out.join("annotate_report.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_build_graph(a: &BuildGraphArgs) -> Result<(), CliError> {
    let edges = read_edge_tsv_file(&a.edges)?;
    let graph = build_graph(&edges, !a.lenient)?;
    save_graph(&graph, &a.out)?;
    println!("{}", serde_json::to_string_pretty(&stats(&graph))?);
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { cfg.$field = v; })* };
    }
    set!(num_users, mean_tweets_per_user, flip, retweet_rate, retweet_exponent, retweet_cap);
    set!(feature_dim, separation, noise_sigma, low_signal_fraction, seed);
    let corpus = generate(&cfg)?;
    corpus.write_files(&a.out)?;
    write_json(&a.out.join("synth_config.json"), &cfg)?;
    let graph = build_graph(&corpus.edges, true)?;
    let degrees = degree_report(&graph);
    #[derive(Serialize)]
    struct Histograms<'a> {
        first_order_hist: &'a [usize],
        second_order_hist: &'a [usize],
    }
    write_json(
        &a.out.join("degree_report.json"),
        &Histograms {
            first_order_hist: &degrees.first_order_hist,
            second_order_hist: &degrees.second_order_hist,
        },
    )?;
    println!("{}", serde_json::to_string_pretty(&stats(&graph))?);
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = experiment_config(&a.experiment)?;
    let data = load_data(&a.data)?;
    let split = stratified_split(&data.labels, cfg.split, cfg.effective_split_seed())?;
    let spec = cfg.model_spec(data.features.cols(), cfg.seed);
    let outcome = train(
        spec,
        &data.graph,
        &data.features,
        &data.labels,
        &split.train,
        &split.val,
        &cfg.train_config(cfg.seed),
    )?;
    for r in &outcome.history {
        info!(
            "step {} lr {:.2e} loss {:.4} val acc {:.4}",
            r.step, r.lr, r.train_loss, r.val_accuracy
        );
    }
    outcome.model.save(&a.out)?;
    write_json(&a.out.join(EXPERIMENT_FILE), &cfg)?;
    let mut w = BufWriter::new(File::create(a.out.join("history.jsonl"))?);
    outcome.write_history(&mut w)?;
    w.flush()?;
    println!(
        "best validation accuracy {:.4} at step {}",
        outcome.best_val_accuracy, outcome.best_step
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluationOutput {
    part: String,
    model: ModelKind,
    #[serde(flatten)]
    metrics: MetricsReport,
    buckets: Vec<sagnn::eval::BucketReport>,
}

fn load_model(dir: &Path, data: &Dataset) -> Result<(Model, ExperimentConfig), CliError> {
    let cfg: ExperimentConfig = read_json(&dir.join(EXPERIMENT_FILE))?;
    let model = Model::load(dir, &data.graph, &data.features)?;
    Ok((model, cfg))
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let data = load_data(&a.data)?;
    let (model, cfg) = load_model(&a.model, &data)?;
    let split = stratified_split(&data.labels, cfg.split, cfg.effective_split_seed())?;
    let ids = split_part(&split, &a.part, data.labels.len())?;
    let pred = model.predict(&data.graph, &data.features, &ids, 2048)?;
    let scores = pred.probabilities();
    let truth: Vec<u8> = ids.iter().map(|&t| data.labels[t as usize]).collect();
    let metrics = evaluate(&scores, &truth, cfg.threshold)?;
    let buckets = match &a.buckets {
        Some(b) => parse_buckets(b)?,
        None => cfg.buckets.clone(),
    };
    let edges = a.bucket_edges.clone().unwrap_or(cfg.bucket_edges.clone());
    let mut reports = Vec::new();
    for b in buckets {
        let (keys, labels) = bucket_keys(&data, &ids, b, &edges)?;
        reports.extend(bucket_metrics(b, &scores, &truth, &keys, &labels, cfg.threshold)?);
    }
    let out = EvaluationOutput {
        part: a.part.clone(),
        model: model.spec.kind,
        metrics,
        buckets: reports,
    };
    match &a.out {
        Some(p) => write_json(p, &out)?,
        None => println!("{}", serde_json::to_string_pretty(&out)?),
    }
    Ok(())
}

fn cmd_trials(a: &TrialsArgs) -> Result<(), CliError> {
    let cfg = experiment_config(&a.experiment)?;
    let seeds = parse_seeds(&a.seeds)?;
    let data = load_data(&a.data)?;
    std::fs::create_dir_all(&a.out)?;
    write_json(&a.out.join(EXPERIMENT_FILE), &cfg)?;
    let mut index = 0;
    let mut write_error = None;
    let result = run_trials_with(&cfg, &data, &seeds, |r| {
        info!("seed {}: test accuracy {:.4}", r.seed, r.test.accuracy);
        if let Err(e) = write_json(&a.out.join(format!("seed_{index}.json")), r) {
            write_error.get_or_insert(e);
        }
        index += 1;
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    match result {
        Ok(summary) => {
            write_json(&a.out.join("summary.json"), &summary)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Err(TrialsError { seed, source, partial }) => {
            write_json(&a.out.join("summary.partial.json"), &partial)?;
            let e = CliError::from(source);
            Err(match e {
                CliError::Validation(m) => CliError::Validation(format!("seed {seed}: {m}")),
                CliError::Runtime(m) => CliError::Runtime(format!("seed {seed}: {m}")),
            })
        }
    }
}

fn cmd_export(a: &ExportArgs) -> Result<(), CliError> {
    let data = load_data(&a.data)?;
    let (model, cfg) = load_model(&a.model, &data)?;
    let split = stratified_split(&data.labels, cfg.split, cfg.effective_split_seed())?;
    let ids = split_part(&split, &a.part, data.labels.len())?;
    let pred = model.predict(&data.graph, &data.features, &ids, 2048)?;
    let tweet_ids = data.graph.tweet_ids();
    if let Some(path) = &a.embeddings {
        let rows = export_embeddings(&pred, tweet_ids, &data.labels, a.fraction, cfg.seed)?;
        let mut w = BufWriter::new(File::create(path)?);
        write_embedding_tsv(&mut w, &rows)?;
        w.flush()?;
        println!("wrote {} embeddings to {}", rows.len(), path.display());
    }
    if let Some(path) = &a.logits {
        let rows = export_misclassified_logits(&pred, tweet_ids, &data.labels, cfg.threshold);
        let mut w = BufWriter::new(File::create(path)?);
        write_misclassified_tsv(&mut w, &rows)?;
        w.flush()?;
        println!("wrote {} misclassified logits to {}", rows.len(), path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Annotate(a) => cmd_annotate(a),
        Command::BuildGraph(a) => cmd_build_graph(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Trials(a) => cmd_trials(a),
        Command::Export(a) => cmd_export(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
