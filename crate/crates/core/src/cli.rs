//! Command-line pipeline: ingest, feature extraction, label construction,
//! training, evaluation, explanation, and the synthetic generator.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::corpus::{
    filter_min_viewers, load_events, load_lectures, FileFormat, Lecture, SubjectMap, ViewEvent,
};
use crate::eval::{
    personalised_comparison, run_cv_experiment, subject_split_experiment, write_bins_csv,
    write_cumulative_csv, write_personalised_csv, write_scatter_csv, write_subject_split_csv,
    PersonalisedOptions,
};
use crate::explain::{
    build_importance_report, shapley_matrix, write_mas_csv, write_shap_summary_csv,
};
use crate::features::{
    design_matrix, extract_corpus, feature_names, write_features_csv, FeatureMode, Lexicons,
};
use crate::labels::{build_label_table, write_labels_csv, Encoding, LabelParams};
use crate::models::{train, ModelFamily, ModelSpec, TrainedModel};
use crate::synth::{generate, write_corpus, GeneratorSpec, LatentFn};

const DEFAULT_MIN_VIEWERS: usize = 5;

#[derive(Parser)]
#[command(
    name = "lectrank",
    version,
    about = "Engagement prediction pipeline for video lectures"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Optional JSON config; command-line flags override its values.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub lectures: Option<PathBuf>,
    pub transcripts: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub subjects_file: Option<PathBuf>,
    pub lexicons_dir: Option<PathBuf>,
    pub format: Option<String>,
    pub min_viewers: Option<usize>,
    pub feature_mode: Option<String>,
    pub encoding: Option<String>,
    pub model: Option<String>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub epsilon: Option<f64>,
    pub bot_threshold: Option<f64>,
    pub lambda: Option<f64>,
    pub c: Option<f64>,
    pub epsilon_insensitive: Option<f64>,
    pub gamma: Option<f64>,
    pub trees: Option<usize>,
    pub max_features: Option<usize>,
    pub min_leaf: Option<usize>,
    pub bootstrap: Option<bool>,
}

#[derive(Debug, Args)]
struct CommonOpts {
    /// JSON config file; flags take precedence over its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for all outputs (created if missing).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Master seed; required for every randomised step.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct CorpusOpts {
    /// Directory holding lectures.csv, transcripts/, events.csv.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    lectures: Option<PathBuf>,
    #[arg(long)]
    transcripts: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    /// Subject to knowledge-area mapping file (defaults to the built-in 21
    /// subjects).
    #[arg(long)]
    subjects_file: Option<PathBuf>,
    /// Directory of lexicon word lists (defaults to the built-in lists).
    #[arg(long)]
    lexicons_dir: Option<PathBuf>,
    /// Lecture file format.
    #[arg(long)]
    format: Option<String>,
    /// Keep only lectures viewed by at least this many distinct users.
    #[arg(long)]
    min_viewers: Option<usize>,
}

#[derive(Debug, Args)]
struct ModelOpts {
    /// Model family: rr, svr, krr, ksvr, rf.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon_insensitive: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    max_features: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    /// Disable bootstrap sampling in the forest.
    #[arg(long)]
    no_bootstrap: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the corpus and print retained lecture/event counts.
    Ingest {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        corpus: CorpusOpts,
    },
    /// Extract features and write features.csv.
    Features {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        corpus: CorpusOpts,
        /// content_only or content_plus_video.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Derive engagement labels and write labels.csv.
    Labels {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        corpus: CorpusOpts,
        /// raw, cleaned, standardised, or comparative.
        #[arg(long)]
        encoding: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        bot_threshold: Option<f64>,
    },
    /// Fit a model on the full corpus and write model.json.
    Train {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        corpus: CorpusOpts,
        #[command(flatten)]
        model: ModelOpts,
        #[arg(long)]
        encoding: Option<String>,
        #[arg(long)]
        mode: Option<String>,
        /// Grid-search hyperparameters by inner cross-validation first.
        #[arg(long)]
        tune: bool,
    },
    /// Cross-validated evaluation with misranking analysis.
    Eval {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        corpus: CorpusOpts,
        #[command(flatten)]
        model: ModelOpts,
        #[arg(long)]
        encoding: Option<String>,
        #[arg(long)]
        folds: Option<usize>,
        /// Add the video-specific feature block.
        #[arg(long)]
        with_video_features: bool,
        /// Restrict pairwise comparisons to same-subject lecture pairs.
        #[arg(long)]
        same_subject: bool,
        /// Also report short/long pairwise accuracies at the 5000-word cut.
        #[arg(long)]
        length_split: bool,
    },
    /// Shapley feature importance; writes shap_summary.csv and mas.csv.
    Explain {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        corpus: CorpusOpts,
        #[command(flatten)]
        model: ModelOpts,
        #[arg(long)]
        encoding: Option<String>,
        #[arg(long)]
        mode: Option<String>,
        /// Explain a previously trained model.json instead of refitting.
        #[arg(long)]
        model_file: Option<PathBuf>,
        /// Monte-Carlo permutations per observation.
        #[arg(long, default_value_t = 128)]
        permutations: usize,
        /// Background rows sampled from the training split.
        #[arg(long, default_value_t = 100)]
        background: usize,
        /// Cap on explained observations.
        #[arg(long, default_value_t = 200)]
        max_observations: usize,
        /// Train fraction of the holdout split.
        #[arg(long, default_value_t = 0.7)]
        split: f64,
    },
    /// Population vs personal models for the most active users.
    Personalise {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        corpus: CorpusOpts,
        #[command(flatten)]
        model: ModelOpts,
        #[arg(long, default_value_t = 20)]
        top_k: usize,
        #[arg(long, default_value_t = 0.7)]
        split: f64,
        #[arg(long, default_value_t = 10)]
        min_events: usize,
    },
    /// Subject-agnostic vs subject-specific training per knowledge area.
    SubjectSplit {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        corpus: CorpusOpts,
        #[command(flatten)]
        model: ModelOpts,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, default_value_t = 0.7)]
        split: f64,
    },
    /// Generate a synthetic corpus with known latent engagement.
    Synth {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value_t = 100)]
        n_lectures: usize,
        #[arg(long, default_value_t = 20)]
        n_users: usize,
        /// linear, step, or product.
        #[arg(long, default_value = "linear")]
        latent: String,
        #[arg(long, default_value_t = 0.0)]
        noise_sd: f64,
    },
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

struct Resolved {
    config: RunConfig,
    out_dir: PathBuf,
    seed: u64,
}

fn resolve_common(common: &CommonOpts) -> Result<Resolved> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = &common.out_dir {
        config.out_dir = Some(dir.clone());
    }
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    let out_dir = config
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs/latest"));
    let seed = config
        .seed
        .context("a seed is required: pass --seed or set `seed` in the config")?;
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    Ok(Resolved {
        config,
        out_dir,
        seed,
    })
}

struct LoadedCorpus {
    lectures: Vec<Lecture>,
    events: Vec<ViewEvent>,
    lexicons: Lexicons,
    lectures_before_filter: usize,
    events_before_filter: usize,
    rejected_rows: usize,
    unknown_lecture_events: usize,
    min_viewers: usize,
    paths: serde_json::Value,
}

fn load_corpus(opts: &CorpusOpts, config: &RunConfig) -> Result<LoadedCorpus> {
    let corpus_dir = opts.corpus.clone().or_else(|| config.corpus.clone());
    let from_dir = |name: &str| corpus_dir.as_ref().map(|d| d.join(name));
    let lectures_path = opts
        .lectures
        .clone()
        .or_else(|| config.lectures.clone())
        .or_else(|| from_dir("lectures.csv"))
        .context("no lectures file: pass --lectures or --corpus")?;
    let transcripts_dir = opts
        .transcripts
        .clone()
        .or_else(|| config.transcripts.clone())
        .or_else(|| from_dir("transcripts"))
        .context("no transcripts directory: pass --transcripts or --corpus")?;
    let events_path = opts
        .events
        .clone()
        .or_else(|| config.events.clone())
        .or_else(|| from_dir("events.csv"))
        .context("no events file: pass --events or --corpus")?;

    let format = match opts
        .format
        .clone()
        .or_else(|| config.format.clone())
        .as_deref()
    {
        None | Some("csv") => FileFormat::Csv,
        Some("json") => FileFormat::Json,
        Some(other) => bail!("unknown lecture format `{other}` (expected csv or json)"),
    };
    let subjects = match opts
        .subjects_file
        .as_ref()
        .or(config.subjects_file.as_ref())
    {
        Some(path) => SubjectMap::from_path(path)?,
        None => SubjectMap::builtin(),
    };
    let lexicons = match opts.lexicons_dir.as_ref().or(config.lexicons_dir.as_ref()) {
        Some(dir) => Lexicons::from_dir(dir)?,
        None => Lexicons::builtin(),
    };

    let lectures = load_lectures(&lectures_path, format, &transcripts_dir, &subjects)?;
    let load = load_events(&events_path)?;
    for rejected in &load.rejected {
        eprintln!(
            "warning: {} line {}: {}",
            events_path.display(),
            rejected.line,
            rejected.reason
        );
    }
    if load.events.is_empty() {
        eprintln!("warning: {} holds no events", events_path.display());
    }
    let known: std::collections::HashSet<&str> =
        lectures.iter().map(|l| l.id.as_str()).collect();
    let unknown_lecture_events = load
        .events
        .iter()
        .filter(|e| !known.contains(e.lecture_id.as_str()))
        .count();

    let min_viewers = opts
        .min_viewers
        .or(config.min_viewers)
        .unwrap_or(DEFAULT_MIN_VIEWERS);
    let lectures_before_filter = lectures.len();
    let events_before_filter = load.events.len();
    let rejected_rows = load.rejected.len();
    let (lectures, events) = filter_min_viewers(lectures, load.events, min_viewers)?;
    Ok(LoadedCorpus {
        lectures,
        events,
        lexicons,
        lectures_before_filter,
        events_before_filter,
        rejected_rows,
        unknown_lecture_events,
        min_viewers,
        paths: json!({
            "lectures": lectures_path.display().to_string(),
            "transcripts": transcripts_dir.display().to_string(),
            "events": events_path.display().to_string(),
        }),
    })
}

fn resolve_mode(flag: &Option<String>, config: &RunConfig, default: FeatureMode) -> Result<FeatureMode> {
    match flag.clone().or_else(|| config.feature_mode.clone()) {
        Some(s) => s.parse().map_err(anyhow::Error::msg),
        None => Ok(default),
    }
}

fn resolve_encoding(flag: &Option<String>, config: &RunConfig) -> Result<Encoding> {
    match flag.clone().or_else(|| config.encoding.clone()) {
        Some(s) => Ok(s.parse()?),
        None => Ok(Encoding::RawLmnet),
    }
}

fn resolve_label_params(
    epsilon: Option<f64>,
    bot_threshold: Option<f64>,
    config: &RunConfig,
) -> LabelParams {
    let mut params = LabelParams::default();
    if let Some(e) = epsilon.or(config.epsilon) {
        params.epsilon = e;
    }
    if let Some(t) = bot_threshold.or(config.bot_threshold) {
        params.bot_threshold = t;
    }
    params
}

fn resolve_spec(opts: &ModelOpts, config: &RunConfig, seed: u64) -> Result<ModelSpec> {
    let family: ModelFamily = opts
        .model
        .clone()
        .or_else(|| config.model.clone())
        .unwrap_or_else(|| "rf".to_string())
        .parse()?;
    let mut spec = ModelSpec::new(family).with_seed(seed);
    if let Some(v) = opts.lambda.or(config.lambda) {
        spec.lambda = v;
    }
    if let Some(v) = opts.c.or(config.c) {
        spec.c = v;
    }
    if let Some(v) = opts.epsilon_insensitive.or(config.epsilon_insensitive) {
        spec.epsilon_insensitive = v;
    }
    if let Some(v) = opts.gamma.or(config.gamma) {
        spec.gamma = Some(v);
    }
    if let Some(v) = opts.trees.or(config.trees) {
        spec.trees = v;
    }
    if let Some(v) = opts.max_features.or(config.max_features) {
        spec.max_features = Some(v);
    }
    if let Some(v) = opts.min_leaf.or(config.min_leaf) {
        spec.min_leaf = v;
    }
    if opts.no_bootstrap {
        spec.bootstrap = false;
    } else if let Some(v) = config.bootstrap {
        spec.bootstrap = v;
    }
    spec.validate()?;
    Ok(spec)
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    resolved: serde_json::Value,
    outputs: &[&str],
) -> Result<()> {
    let canonical = serde_json::to_string(&resolved)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let hash: String = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let manifest = json!({
        "tool": "lectrank",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "model_format_version": crate::models::MODEL_FORMAT_VERSION,
        "command": command,
        "config": resolved,
        "config_sha256": hash,
        "outputs": outputs,
    });
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Rows, targets, column names, and kept lecture indices.
type LabelledMatrix = (Vec<Vec<f64>>, Vec<f64>, Vec<String>, Vec<usize>);

/// Labelled design matrix aligned with the label table.
fn labelled_matrix(
    loaded: &LoadedCorpus,
    mode: FeatureMode,
    encoding: Encoding,
    params: LabelParams,
) -> Result<LabelledMatrix> {
    let features = extract_corpus(&loaded.lectures, &loaded.lexicons, mode)?;
    let rows = design_matrix(&features, mode);
    let table = build_label_table(&loaded.lectures, &loaded.events, encoding, params)?;
    let target: std::collections::BTreeMap<&str, f64> = table
        .entries
        .iter()
        .map(|e| (e.lecture_id.as_str(), e.target))
        .collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut kept = Vec::new();
    for (i, l) in loaded.lectures.iter().enumerate() {
        if let Some(&t) = target.get(l.id.as_str()) {
            x.push(rows[i].clone());
            y.push(t);
            kept.push(i);
        }
    }
    Ok((x, y, feature_names(mode), kept))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest { common, corpus } => {
            let resolved = resolve_common(&common)?;
            let loaded = load_corpus(&corpus, &resolved.config)?;
            println!(
                "lectures: {} parsed, {} retained after the >= {} distinct-viewer filter",
                loaded.lectures_before_filter,
                loaded.lectures.len(),
                loaded.min_viewers
            );
            println!(
                "events: {} parsed, {} retained, {} rejected rows, {} referencing unknown lectures",
                loaded.events_before_filter,
                loaded.events.len(),
                loaded.rejected_rows,
                loaded.unknown_lecture_events
            );
            write_manifest(
                &resolved.out_dir,
                "ingest",
                json!({
                    "paths": loaded.paths,
                    "min_viewers": loaded.min_viewers,
                    "seed": resolved.seed,
                    "lectures_retained": loaded.lectures.len(),
                    "events_retained": loaded.events.len(),
                }),
                &[],
            )
        }
        Command::Features {
            common,
            corpus,
            mode,
        } => {
            let resolved = resolve_common(&common)?;
            let loaded = load_corpus(&corpus, &resolved.config)?;
            let mode = resolve_mode(&mode, &resolved.config, FeatureMode::ContentPlusVideo)?;
            let features = extract_corpus(&loaded.lectures, &loaded.lexicons, mode)?;
            let ids: Vec<String> = loaded.lectures.iter().map(|l| l.id.clone()).collect();
            let path = resolved.out_dir.join("features.csv");
            write_features_csv(&path, &ids, &features, mode)?;
            println!(
                "wrote {} ({} lectures, {} columns)",
                path.display(),
                features.len(),
                feature_names(mode).len()
            );
            write_manifest(
                &resolved.out_dir,
                "features",
                json!({
                    "paths": loaded.paths,
                    "min_viewers": loaded.min_viewers,
                    "mode": mode.as_str(),
                    "seed": resolved.seed,
                }),
                &["features.csv"],
            )
        }
        Command::Labels {
            common,
            corpus,
            encoding,
            epsilon,
            bot_threshold,
        } => {
            let resolved = resolve_common(&common)?;
            let loaded = load_corpus(&corpus, &resolved.config)?;
            let encoding = resolve_encoding(&encoding, &resolved.config)?;
            let params = resolve_label_params(epsilon, bot_threshold, &resolved.config);
            let table = build_label_table(&loaded.lectures, &loaded.events, encoding, params)?;
            if !table.excluded.is_empty() {
                eprintln!(
                    "warning: {} lectures had no usable signal under `{}` and were excluded",
                    table.excluded.len(),
                    encoding.as_str()
                );
            }
            let path = resolved.out_dir.join("labels.csv");
            write_labels_csv(&table, &path)?;
            println!("wrote {} ({} labelled lectures)", path.display(), table.entries.len());
            write_manifest(
                &resolved.out_dir,
                "labels",
                json!({
                    "paths": loaded.paths,
                    "min_viewers": loaded.min_viewers,
                    "encoding": encoding.as_str(),
                    "epsilon": params.epsilon,
                    "bot_threshold": params.bot_threshold,
                    "seed": resolved.seed,
                }),
                &["labels.csv"],
            )
        }
        Command::Train {
            common,
            corpus,
            model,
            encoding,
            mode,
            tune,
        } => {
            let resolved = resolve_common(&common)?;
            let loaded = load_corpus(&corpus, &resolved.config)?;
            let mode = resolve_mode(&mode, &resolved.config, FeatureMode::ContentOnly)?;
            let encoding = resolve_encoding(&encoding, &resolved.config)?;
            let params = resolve_label_params(None, None, &resolved.config);
            let mut spec = resolve_spec(&model, &resolved.config, resolved.seed)?;
            let (x, y, names, _) = labelled_matrix(&loaded, mode, encoding, params)?;
            if tune {
                let grid = crate::models::default_grid(spec.family, names.len(), resolved.seed);
                spec = crate::models::select_hyperparameters(&x, &y, &names, &grid, 3, resolved.seed)?;
                println!("tuned spec: {}", serde_json::to_string(&spec)?);
            }
            let fitted = train(&x, &y, &names, &spec)?;
            let path = resolved.out_dir.join("model.json");
            std::fs::write(&path, fitted.to_json()?)?;
            println!(
                "wrote {} ({} on {} lectures, {} features)",
                path.display(),
                spec.family.as_str(),
                x.len(),
                names.len()
            );
            write_manifest(
                &resolved.out_dir,
                "train",
                json!({
                    "paths": loaded.paths,
                    "min_viewers": loaded.min_viewers,
                    "mode": mode.as_str(),
                    "encoding": encoding.as_str(),
                    "spec": spec,
                    "tuned": tune,
                    "seed": resolved.seed,
                }),
                &["model.json"],
            )
        }
        Command::Eval {
            common,
            corpus,
            model,
            encoding,
            folds,
            with_video_features,
            same_subject,
            length_split,
        } => {
            let resolved = resolve_common(&common)?;
            let loaded = load_corpus(&corpus, &resolved.config)?;
            let encoding = resolve_encoding(&encoding, &resolved.config)?;
            let params = resolve_label_params(None, None, &resolved.config);
            let spec = resolve_spec(&model, &resolved.config, resolved.seed)?;
            let mode = if with_video_features {
                FeatureMode::ContentPlusVideo
            } else {
                resolve_mode(&None, &resolved.config, FeatureMode::ContentOnly)?
            };
            let folds = folds.or(resolved.config.folds).unwrap_or(5);
            let opts = crate::eval::CvExperimentOptions {
                mode,
                encoding,
                label_params: params,
                spec: spec.clone(),
                folds,
                seed: resolved.seed,
                same_subject,
                length_split,
            };
            let report = run_cv_experiment(&loaded.lectures, &loaded.events, &loaded.lexicons, &opts)?;
            std::fs::write(
                resolved.out_dir.join("report.json"),
                serde_json::to_string_pretty(&report)?,
            )?;
            write_bins_csv(&report.binned, &resolved.out_dir.join("bins.csv"))?;
            write_cumulative_csv(&report.cumulative, &resolved.out_dir.join("cumulative.csv"))?;
            write_scatter_csv(&report.scatter, &resolved.out_dir.join("scatter.csv"))?;
            println!(
                "{} | {} | {} folds | pairwise {:.3} +/- {:.3} | srocc {:.3} +/- {:.3} | mae {:.3}",
                report.model,
                report.encoding,
                report.folds,
                report.pairwise_accuracy,
                report.pairwise_se,
                report.srocc,
                report.srocc_se,
                report.mae
            );
            write_manifest(
                &resolved.out_dir,
                "eval",
                json!({
                    "paths": loaded.paths,
                    "min_viewers": loaded.min_viewers,
                    "mode": mode.as_str(),
                    "encoding": encoding.as_str(),
                    "spec": spec,
                    "folds": folds,
                    "same_subject": same_subject,
                    "length_split": length_split,
                    "seed": resolved.seed,
                }),
                &["report.json", "bins.csv", "cumulative.csv", "scatter.csv"],
            )
        }
        Command::Explain {
            common,
            corpus,
            model,
            encoding,
            mode,
            model_file,
            permutations,
            background,
            max_observations,
            split,
        } => {
            let resolved = resolve_common(&common)?;
            let loaded = load_corpus(&corpus, &resolved.config)?;
            let mode = resolve_mode(&mode, &resolved.config, FeatureMode::ContentOnly)?;
            let encoding = resolve_encoding(&encoding, &resolved.config)?;
            let params = resolve_label_params(None, None, &resolved.config);
            let spec = resolve_spec(&model, &resolved.config, resolved.seed)?;
            let (x, y, names, _) = labelled_matrix(&loaded, mode, encoding, params)?;

            // Holdout split: explain the test rows against a training-row
            // background, fitting on the training side unless a model file
            // is supplied.
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..x.len()).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(resolved.seed);
            order.shuffle(&mut rng);
            let n_train = ((x.len() as f64 * split).floor() as usize).clamp(1, x.len() - 1);
            let (train_idx, test_idx) = order.split_at(n_train);

            let fitted: TrainedModel = match &model_file {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    TrainedModel::from_json(&text)?
                }
                None => {
                    let x_train: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
                    let y_train: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
                    train(&x_train, &y_train, &names, &spec)?
                }
            };
            if fitted.feature_names != names {
                bail!(
                    "model feature signature {:?} does not match the requested mode",
                    fitted.feature_names
                );
            }

            let mut background_rows: Vec<Vec<f64>> =
                train_idx.iter().map(|&i| x[i].clone()).collect();
            background_rows.shuffle(&mut rng);
            background_rows.truncate(background.max(1));
            let explained: Vec<Vec<f64>> = test_idx
                .iter()
                .take(max_observations.max(1))
                .map(|&i| x[i].clone())
                .collect();

            let predict = |row: &[f64]| fitted.predict_row(row);
            let shap = shapley_matrix(
                &predict,
                &explained,
                &background_rows,
                permutations,
                resolved.seed,
            );
            let report = build_importance_report(&names, shap)?;
            write_shap_summary_csv(
                &report,
                &explained,
                &resolved.out_dir.join("shap_summary.csv"),
            )?;
            write_mas_csv(&report, &resolved.out_dir.join("mas.csv"))?;
            let top: Vec<String> = {
                let mut order: Vec<usize> = (0..report.mas.len()).collect();
                order.sort_by(|&a, &b| report.mas[b].total_cmp(&report.mas[a]));
                order
                    .iter()
                    .take(5)
                    .map(|&i| format!("{} {:.4}", report.feature_names[i], report.mas[i]))
                    .collect()
            };
            println!(
                "explained {} observations with {} permutations; top features: {}",
                explained.len(),
                permutations,
                top.join(", ")
            );
            write_manifest(
                &resolved.out_dir,
                "explain",
                json!({
                    "paths": loaded.paths,
                    "min_viewers": loaded.min_viewers,
                    "mode": mode.as_str(),
                    "encoding": encoding.as_str(),
                    "spec": spec,
                    "model_file": model_file.map(|p| p.display().to_string()),
                    "permutations": permutations,
                    "background": background,
                    "max_observations": max_observations,
                    "split": split,
                    "seed": resolved.seed,
                }),
                &["shap_summary.csv", "mas.csv"],
            )
        }
        Command::Personalise {
            common,
            corpus,
            model,
            top_k,
            split,
            min_events,
        } => {
            let resolved = resolve_common(&common)?;
            let loaded = load_corpus(&corpus, &resolved.config)?;
            let spec = resolve_spec(&model, &resolved.config, resolved.seed)?;
            let params = resolve_label_params(None, None, &resolved.config);
            let opts = PersonalisedOptions {
                spec,
                top_k_users: top_k,
                split,
                min_events,
                seed: resolved.seed,
                epsilon: params.epsilon,
            };
            let report =
                personalised_comparison(&loaded.lectures, &loaded.events, &loaded.lexicons, &opts)?;
            for (user, reason) in &report.skipped {
                eprintln!("skipped {user}: {reason}");
            }
            let path = resolved.out_dir.join("personalised.csv");
            write_personalised_csv(&report, &path)?;
            println!(
                "wrote {} ({} users compared, {} skipped)",
                path.display(),
                report.users.len(),
                report.skipped.len()
            );
            write_manifest(
                &resolved.out_dir,
                "personalise",
                json!({
                    "paths": loaded.paths,
                    "min_viewers": loaded.min_viewers,
                    "spec": opts.spec,
                    "top_k": top_k,
                    "split": split,
                    "min_events": min_events,
                    "seed": resolved.seed,
                }),
                &["personalised.csv"],
            )
        }
        Command::SubjectSplit {
            common,
            corpus,
            model,
            mode,
            split,
        } => {
            let resolved = resolve_common(&common)?;
            let loaded = load_corpus(&corpus, &resolved.config)?;
            let mode = resolve_mode(&mode, &resolved.config, FeatureMode::ContentOnly)?;
            let spec = resolve_spec(&model, &resolved.config, resolved.seed)?;
            let report = subject_split_experiment(
                &loaded.lectures,
                &loaded.events,
                &loaded.lexicons,
                mode,
                &spec,
                split,
                resolved.seed,
            )?;
            let path = resolved.out_dir.join("subject_split.csv");
            write_subject_split_csv(&report, &path)?;
            println!(
                "test pairwise accuracy | STEM: agnostic {:.3} vs specific {:.3} | Misc: agnostic {:.3} vs specific {:.3}",
                report.agnostic_stem, report.specific_stem, report.agnostic_misc, report.specific_misc
            );
            write_manifest(
                &resolved.out_dir,
                "subject-split",
                json!({
                    "paths": loaded.paths,
                    "min_viewers": loaded.min_viewers,
                    "mode": mode.as_str(),
                    "spec": spec,
                    "split": split,
                    "seed": resolved.seed,
                }),
                &["subject_split.csv"],
            )
        }
        Command::Synth {
            common,
            n_lectures,
            n_users,
            latent,
            noise_sd,
        } => {
            let resolved = resolve_common(&common)?;
            let latent_fn: LatentFn = latent.parse().map_err(anyhow::Error::msg)?;
            let spec = GeneratorSpec {
                n_lectures,
                n_users,
                latent_fn,
                noise_sd,
                seed: resolved.seed,
            };
            let corpus = generate(&spec);
            write_corpus(&corpus, &resolved.out_dir)?;
            println!(
                "wrote synthetic corpus to {} ({} lectures, {} events)",
                resolved.out_dir.display(),
                corpus.lectures.len(),
                corpus.events.len()
            );
            write_manifest(
                &resolved.out_dir,
                "synth",
                json!({
                    "generator": spec,
                    "seed": resolved.seed,
                }),
                &["lectures.csv", "events.csv", "transcripts", "latents.csv"],
            )
        }
    }
}
