//! Command-line driver: corpus ingestion, training, evaluation, prediction
//! and the HTTP service.
//!
//! Each command that writes files also writes a [`RunManifest`] listing its
//! inputs and artifacts with SHA-256 hashes, so a run can be repeated and
//! checked byte for byte.

mod error;
pub mod manifest;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use spamlens_core::artifact::{BundleMeta, ModelBundle};
use spamlens_core::corpus::{
    balance_classes, filter_by_length, parse_opspam_dir, read_records, write_records, Corpus, Label, Review,
};
use spamlens_core::eval::{
    confusion_matrix, fit_recipe, load_embeddings, run_protocol, score_reviews, Confusion, EvalReport, ModelRecipe,
    Protocol, RunOptions,
};
use spamlens_core::features::build_reviewer_profiles;
use spamlens_core::{synth, ExecMode};
use spamlens_service::analysis::score_review;
use spamlens_service::ServiceConfig;

pub use error::CliError;
use error::corpus_err;
pub use manifest::{ManifestBuilder, RunManifest};

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "spamlens", version, about = "Deceptive review detection")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML settings file (execution mode, service settings).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a corpus into the review record format.
    Ingest(IngestArgs),
    /// Train a model bundle from a corpus and a recipe.
    Train(TrainArgs),
    /// Run a validation protocol and write the report.
    Eval(EvalArgs),
    /// Score texts or a record file with a saved model.
    Predict(PredictArgs),
    /// Serve saved models over HTTP.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Predict(_) => "predict",
            Command::Serve(_) => "serve",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// Text-only hotel reviews, balanced.
    Opspam,
    /// Reviews with reviewer ids, ratings and dates.
    Yelp,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["opspam", "records", "synthetic"])))]
pub struct IngestArgs {
    /// Hotel corpus directory (`*_polarity/<class>/fold*/*.txt`).
    #[arg(long)]
    pub opspam: Option<PathBuf>,
    /// Review records file (JSON lines).
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Generate a synthetic corpus instead of reading one.
    #[arg(long, value_enum)]
    pub synthetic: Option<SyntheticKind>,
    /// Synthetic size: reviews per class for `opspam`, total for `yelp`.
    #[arg(long, requires = "synthetic")]
    pub size: Option<usize>,
    /// Drop reviews longer than this many words.
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Downsample to equal class counts.
    #[arg(long)]
    pub balance: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Recipe file, TOML or JSON by extension.
    #[arg(long)]
    pub recipe: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub name: String,
    /// Hold out this stratified fraction and report accuracy on it.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Defaults to `<out_dir>/<name>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("protocol").required(true).args(["kfold", "bootstrap"])))]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub recipe: PathBuf,
    /// Stratified k-fold cross-validation.
    #[arg(long)]
    pub kfold: Option<usize>,
    /// Bootstrap resampling with out-of-bag testing, repeated this many times.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Machine-readable report.
    #[arg(long)]
    pub report: PathBuf,
    /// Defaults to `<report>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("what").required(true).args(["text", "input"])))]
pub struct PredictArgs {
    #[arg(long)]
    pub model_dir: PathBuf,
    /// Bundle name; defaults to the first in the directory.
    #[arg(long)]
    pub name: Option<String>,
    /// Score one text and print the explanation.
    #[arg(long)]
    pub text: Option<String>,
    /// Score every review in a records file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Write JSON lines here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub exec: ExecMode,
    pub service: ServiceConfig,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let src = fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&src).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Human-readable summary for stdout.
    pub summary: String,
    pub manifest: Option<RunManifest>,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let config = CliConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a, cli.seed, &config),
        Command::Train(a) => cmd_train(a, cli.seed, &config),
        Command::Eval(a) => cmd_eval(a, cli.seed, &config),
        Command::Predict(a) => cmd_predict(a, &config),
        Command::Serve(a) => cmd_serve(a, &config),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    fs::write(path, bytes).map_err(CliError::io(path))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    let file = fs::File::open(path).map_err(CliError::io(path))?;
    read_records(std::io::BufReader::new(file)).map_err(corpus_err(path))
}

fn corpus_bytes(corpus: &Corpus) -> Vec<u8> {
    let mut out = Vec::new();
    write_records(corpus, &mut out).expect("writing to memory");
    out
}

/// Read a recipe as TOML (`.toml`) or JSON (anything else) and validate it.
pub fn load_recipe(path: &Path) -> Result<ModelRecipe, CliError> {
    let src = fs::read_to_string(path).map_err(CliError::io(path))?;
    let recipe: ModelRecipe = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&src).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&src).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
    };
    recipe.validate().map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(recipe)
}

fn require_labels(corpus: &Corpus, path: &Path) -> Result<(), CliError> {
    let unknown = corpus.count(Label::Unknown);
    if unknown > 0 {
        return Err(CliError::input(path, format!("{unknown} review(s) have no label")));
    }
    Ok(())
}

fn class_line(corpus: &Corpus) -> String {
    format!(
        "{} reviews ({} deceptive, {} genuine)",
        corpus.len(),
        corpus.count(Label::Deceptive),
        corpus.count(Label::Genuine)
    )
}

pub fn cmd_ingest(args: &IngestArgs, seed: Option<u64>, config: &CliConfig) -> Result<Outcome, CliError> {
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let mut mb = ManifestBuilder::new("ingest", json!({"args": args}), seed);
    let mut corpus = if let Some(dir) = &args.opspam {
        mb.input(dir)?;
        let (corpus, summary) = parse_opspam_dir(dir, config.exec).map_err(corpus_err(dir))?;
        for (path, why) in &summary.skipped {
            warn!("skipped {}: {why}", path.display());
        }
        corpus
    } else if let Some(path) = &args.records {
        mb.input(path)?;
        read_corpus(path)?
    } else {
        match args.synthetic.expect("clap enforces one source") {
            SyntheticKind::Opspam => synth::opspam_style(args.size.unwrap_or(800), seed),
            SyntheticKind::Yelp => synth::yelp_style(args.size.unwrap_or(2000), seed),
        }
    };
    let n_read = corpus.len();
    if let Some(max_words) = args.max_words {
        corpus = filter_by_length(&corpus, max_words).map_err(|e| CliError::Invalid(format!("--max-words: {e}")))?;
    }
    let n_filtered = corpus.len();
    if args.balance {
        corpus = balance_classes(&corpus, seed).map_err(|e| CliError::Failed(format!("--balance: {e}")))?;
    }
    write_file(&args.out, &corpus_bytes(&corpus))?;
    let manifest = mb.finish(std::slice::from_ref(&args.out))?;
    manifest.write(&args.manifest.clone().unwrap_or_else(|| with_suffix(&args.out, ".manifest.json")))?;
    let mut summary = format!("read {n_read} reviews");
    if args.max_words.is_some() {
        summary += &format!(", {n_filtered} within length bound");
    }
    summary += &format!("\nwrote {} to {}", class_line(&corpus), args.out.display());
    Ok(Outcome { summary, manifest: Some(manifest) })
}

/// Stratified holdout: `ceil(fraction * n_class)` reviews of each class go to
/// the test side.
pub fn holdout_split(labels: &[Label], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::Invalid(format!("--holdout: must be in (0, 1), got {fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [Label::Deceptive, Label::Genuine] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n_test = (fraction * members.len() as f64).ceil() as usize;
        if n_test == 0 || n_test >= members.len() {
            return Err(CliError::Invalid(format!(
                "--holdout: class {class} with {} reviews cannot be split at {fraction}",
                members.len()
            )));
        }
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub confusion: Confusion,
}

pub fn cmd_train(args: &TrainArgs, seed: Option<u64>, config: &CliConfig) -> Result<Outcome, CliError> {
    if !spamlens_core::artifact::valid_name(&args.name) {
        return Err(CliError::Invalid(format!("--name: invalid bundle name {:?}", args.name)));
    }
    let mut recipe = load_recipe(&args.recipe)?;
    if seed.is_some() {
        recipe.train.seed = seed;
    }
    let train_seed = recipe.train_config(None).seed;
    let mut mb = ManifestBuilder::new("train", json!({"args": args, "recipe": recipe}), train_seed);
    mb.input(&args.corpus)?;
    mb.input(&args.recipe)?;
    let corpus = read_corpus(&args.corpus)?;
    require_labels(&corpus, &args.corpus)?;
    let opts = RunOptions { mode: config.exec, embeddings: load_embeddings(&recipe)? };
    if let Some(path) = &recipe.features.embeddings {
        mb.input(path)?;
    }

    let (train, holdout) = match args.holdout {
        Some(fraction) => {
            let (tr, te) = holdout_split(&corpus.labels(), fraction, train_seed)?;
            (corpus.select(&tr), Some((fraction, corpus.select(&te))))
        }
        None => (corpus.reviews().to_vec(), None),
    };
    info!("training {:?} on {} reviews", recipe.model, train.len());
    let (pipeline, model) = fit_recipe(&train, &recipe, train_seed, &opts)?;

    let mut artifacts = Vec::new();
    let mut summary = format!("trained {} on {}", args.name, class_line(&Corpus::new(train.clone()).expect("subset")));
    let mut report_ref = None;
    if let Some((fraction, test)) = holdout {
        let ps = score_reviews(&pipeline, &model, &train, &test, config.exec)?;
        let predicted: Vec<Label> = ps.iter().map(|&p| Label::from_probability(p)).collect();
        let gold: Vec<Label> = test.iter().map(|r| r.label).collect();
        let confusion = confusion_matrix(&predicted, &gold)?;
        let report = HoldoutReport { fraction, n_train: train.len(), n_test: test.len(), accuracy: confusion.accuracy(), confusion };
        let path = args.out_dir.join(format!("{}.holdout.json", args.name));
        write_file(&path, (serde_json::to_string_pretty(&report).expect("report serializes") + "\n").as_bytes())?;
        summary += &format!("\nholdout accuracy {:.4} on {} reviews", report.accuracy, report.n_test);
        report_ref = Some(path.display().to_string());
        artifacts.push(path);
    }

    fs::create_dir_all(&args.out_dir).map_err(CliError::io(&args.out_dir))?;
    let meta = BundleMeta {
        name: args.name.clone(),
        kind: Some(model.kind()),
        trained_on: Some(args.corpus.display().to_string()),
        accuracy_report_ref: report_ref,
        corpus_sha256: Some(manifest::hash_path(&args.corpus)?.sha256),
    };
    let bundle = ModelBundle { meta, model, pipeline };
    let paths = bundle.save(&args.out_dir)?;
    artifacts.splice(0..0, paths);
    let manifest = mb.finish(&artifacts)?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| args.out_dir.join(format!("{}.manifest.json", args.name)));
    manifest.write(&manifest_path)?;
    summary += &format!("\nwrote {}", artifacts[0].display());
    Ok(Outcome { summary, manifest: Some(manifest) })
}

/// Run a protocol; returns the report alongside the outcome so callers can
/// inspect it without re-reading the file.
pub fn cmd_eval_report(args: &EvalArgs, seed: Option<u64>, config: &CliConfig) -> Result<(EvalReport, Outcome), CliError> {
    let protocol_seed = seed.unwrap_or(DEFAULT_SEED);
    let protocol = match (args.kfold, args.bootstrap) {
        (Some(k), None) => Protocol::kfold(k, protocol_seed),
        (None, Some(r)) => Protocol::bootstrap(r, protocol_seed),
        _ => return Err(CliError::Usage("exactly one of --kfold or --bootstrap is required".into())),
    };
    match (args.kfold, args.bootstrap) {
        (Some(k), _) if k < 2 => return Err(CliError::Invalid(format!("--kfold: must be at least 2, got {k}"))),
        (_, Some(0)) => return Err(CliError::Invalid("--bootstrap: must be at least 1".into())),
        _ => {}
    }
    let mut recipe = load_recipe(&args.recipe)?;
    if seed.is_some() {
        recipe.train.seed = seed;
    }
    let mut mb = ManifestBuilder::new("eval", json!({"args": args, "recipe": recipe, "protocol": protocol}), protocol_seed);
    mb.input(&args.corpus)?;
    mb.input(&args.recipe)?;
    let corpus = read_corpus(&args.corpus)?;
    require_labels(&corpus, &args.corpus)?;
    let opts = RunOptions { mode: config.exec, embeddings: load_embeddings(&recipe)? };
    if let Some(path) = &recipe.features.embeddings {
        mb.input(path)?;
    }
    let report = run_protocol(&corpus, &recipe, &protocol, &opts)?;
    write_file(&args.report, (report.to_json() + "\n").as_bytes())?;
    let manifest = mb.finish(std::slice::from_ref(&args.report))?;
    manifest.write(&args.manifest.clone().unwrap_or_else(|| with_suffix(&args.report, ".manifest.json")))?;
    let summary = format!("{}report {} (sha256 {})", report.table(), args.report.display(), manifest.artifacts[0].sha256);
    Ok((report, Outcome { summary, manifest: Some(manifest) }))
}

pub fn cmd_eval(args: &EvalArgs, seed: Option<u64>, config: &CliConfig) -> Result<Outcome, CliError> {
    cmd_eval_report(args, seed, config).map(|(_, o)| o)
}

fn load_bundle(dir: &Path, name: Option<&str>) -> Result<ModelBundle, CliError> {
    let name = match name {
        Some(n) => n.to_owned(),
        None => spamlens_core::artifact::list_bundles(dir)?
            .into_iter()
            .next()
            .ok_or_else(|| CliError::input(dir, "no model bundles found"))?,
    };
    Ok(ModelBundle::load(dir, &name)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub p_deceptive: f64,
    pub label: Label,
}

pub fn cmd_predict(args: &PredictArgs, config: &CliConfig) -> Result<Outcome, CliError> {
    let bundle = load_bundle(&args.model_dir, args.name.as_deref())?;
    let lines: Vec<String> = if let Some(text) = &args.text {
        let out = score_review(&bundle, text, None).map_err(|e| CliError::Invalid(e.to_string()))?;
        vec![serde_json::to_string(&out).expect("serializes")]
    } else {
        let path = args.input.as_ref().expect("clap enforces one input");
        let corpus = read_corpus(path)?;
        let reviews: &[Review] = corpus.reviews();
        // reviewer statistics come from the scored file itself
        let profiles = build_reviewer_profiles(reviews);
        let xs = bundle.pipeline.transform(reviews, &profiles, config.exec);
        let ps = bundle.model.predict_batch(&xs, config.exec).map_err(|e| CliError::Failed(e.to_string()))?;
        reviews
            .iter()
            .zip(ps)
            .map(|(r, p)| {
                let rec = PredictionRecord { id: r.id.clone(), p_deceptive: p, label: Label::from_probability(p) };
                serde_json::to_string(&rec).expect("serializes")
            })
            .collect()
    };
    let body = lines.join("\n") + "\n";
    let summary = match &args.out {
        Some(path) => {
            write_file(path, body.as_bytes())?;
            format!("wrote {} prediction(s) to {}", lines.len(), path.display())
        }
        None => body.trim_end().to_owned(),
    };
    Ok(Outcome { summary, manifest: None })
}

pub fn cmd_serve(args: &ServeArgs, config: &CliConfig) -> Result<Outcome, CliError> {
    let mut service = config.service.clone().with_env().map_err(|e| CliError::Invalid(e.to_string()))?;
    if let Some(listen) = &args.listen {
        service.listen = listen.clone();
    }
    if let Some(dir) = &args.model_dir {
        service.model_dir = dir.clone();
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    rt.block_on(spamlens_service::serve(service)).map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(Outcome { summary: "server stopped".into(), manifest: None })
}
