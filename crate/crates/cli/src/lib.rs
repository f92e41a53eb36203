//! Command implementations behind the `gaprf` binary.
//!
//! Each `cmd_*` function does the full job of one subcommand, writes its
//! artifacts plus a run manifest, and returns a summary of what it did. The
//! binary maps errors to exit code 2 and verification failure to 1.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gaprf::data::{self, generate_synthetic, Dataset, EncodedRows, NoiseProfile, RawTable, Schema, SyntheticConfig};
use gaprf::eval::{metrics, randomized_search, EvalSummary, Metrics, ParamDistributions, SearchResult};
use gaprf::explain::{
    self, confidence_vs_error, CumulativeWeightCurve, ExplainOptions, Explainer, LabelHistogram, NeighborsNeeded,
    TrainingErrorMode, TrainingErrors, DEFAULT_THRESHOLDS,
};
use gaprf::proximity::{verify_reconstruction, ReconstructionReport};
use gaprf::{Forest, ForestParams, MaxFeatures, ModelFile, Task};
use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gaprf", version, about = "Random forests with exact GAP proximities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic regression dataset to CSV.
    Synth(SynthArgs),
    /// Fit a forest (optionally after a randomized search) and save it.
    Train(TrainArgs),
    /// Explain predictions as weighted sums over training rows.
    Explain(ExplainArgs),
    /// Check that GAP reconstructions reproduce the forest's predictions.
    Verify(VerifyArgs),
    /// Score a labeled test file and relate errors to neighbor confidence.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Homoscedastic,
    Heteroscedastic,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// key=value file; overrides the individual flags below.
    #[arg(long)]
    pub synthetic_config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    #[arg(long, default_value_t = 5)]
    pub numeric: usize,
    #[arg(long, default_value_t = 1)]
    pub categorical: usize,
    #[arg(long, value_enum, default_value_t = NoiseKind::Homoscedastic)]
    pub noise: NoiseKind,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_low: f64,
    #[arg(long, default_value_t = 2.0)]
    pub sigma_high: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    fn config(&self) -> Result<SyntheticConfig> {
        if let Some(path) = &self.synthetic_config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(SyntheticConfig::from_key_values(&text)?);
        }
        let noise = match self.noise {
            NoiseKind::Homoscedastic => NoiseProfile::Homoscedastic { sigma: self.sigma },
            NoiseKind::Heteroscedastic => NoiseProfile::Heteroscedastic {
                low: self.sigma_low,
                high: self.sigma_high,
            },
        };
        let cfg = SyntheticConfig {
            n_rows: self.rows,
            n_numeric: self.numeric,
            n_categorical: self.categorical,
            noise,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Training CSV.
    #[arg(long, required_unless_present = "synthetic_config")]
    pub data: Option<PathBuf>,
    /// Generate the training data from a key=value synthetic config instead.
    #[arg(long, conflicts_with = "data")]
    pub synthetic_config: Option<PathBuf>,
    /// Target column (defaults to `y` for synthetic data).
    #[arg(long)]
    pub target: Option<String>,
    /// Column used to order rows in time.
    #[arg(long)]
    pub timestamp: Option<String>,
    #[arg(long, value_enum, default_value_t = TaskKind::Regression)]
    pub task: TaskKind,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// `all`, `sqrt` or a fraction in (0, 1].
    #[arg(long, default_value = "all")]
    pub max_features: String,
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
    /// Give every tree each row exactly once instead of a bootstrap sample.
    #[arg(long)]
    pub no_bootstrap: bool,
    /// JSON file with `distributions`, `n_samples` and `n_folds` for a randomized search.
    #[arg(long)]
    pub search_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train on this leading fraction of the time-ordered rows and test on the rest.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Where to write the held-out test rows when a split is requested.
    #[arg(long, requires = "train_fraction")]
    pub test_out: Option<PathBuf>,
    /// Model output path.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Query CSV; a target column, if present, is used as the realized label.
    #[arg(long)]
    pub data: PathBuf,
    /// Cumulative weight the kept neighbor prefix must reach.
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    /// Explain only this many query rows, drawn at random with `--seed`.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use in-bag fitted values instead of out-of-bag predictions for training errors.
    #[arg(long)]
    pub in_bag_errors: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Largest accepted GAP error. 0 can fail on floating-point rounding of the sums.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Output directory for the report; defaults to next to the model file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled test CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Column holding a baseline prediction to compare against.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub deciles: usize,
    #[arg(long)]
    pub in_bag_errors: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Search settings read from `--search-config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub distributions: ParamDistributions,
    pub n_samples: usize,
    pub n_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one CLI run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub library_version: String,
    pub duration_secs: f64,
}

struct ManifestBuilder {
    command: &'static str,
    started: Instant,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    fn new(command: &'static str) -> Self {
        ManifestBuilder {
            command,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: file_digest(path)?,
        });
        Ok(())
    }

    fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    fn finish(self, config: serde_json::Value, seed: Option<u64>, path: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config,
            seed,
            inputs: self.inputs,
            outputs: self.outputs,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        write_json(path, &manifest)?;
        Ok(path.to_path_buf())
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Synth(args) => cmd_synth(&args).map(|_| EXIT_OK),
        Command::Train(args) => cmd_train(&args).map(|_| EXIT_OK),
        Command::Explain(args) => cmd_explain(&args).map(|_| EXIT_OK),
        Command::Verify(args) => cmd_verify(&args).map(|o| o.exit_code),
        Command::Eval(args) => cmd_eval(&args).map(|_| EXIT_OK),
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub rows: usize,
    pub manifest: PathBuf,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<SynthOutcome> {
    let mut manifest = ManifestBuilder::new("synth");
    if let Some(path) = &args.synthetic_config {
        manifest.input(path)?;
    }
    let cfg = args.config()?;
    let ds = generate_synthetic(&cfg)?;
    ds.write_csv(&args.out)?;
    manifest.output(&args.out);
    println!("wrote {} rows to {}", ds.n_rows(), args.out.display());
    let config = serde_json::json!({ "args": args, "synthetic": cfg });
    let path = manifest.finish(config, Some(cfg.seed), &suffixed(&args.out, ".manifest.json"))?;
    Ok(SynthOutcome {
        rows: ds.n_rows(),
        manifest: path,
    })
}

/// Error metrics in a form shared by both tasks: regression compares
/// predictions with labels, classification uses `1 − p̂(y)` as the error.
pub fn task_metrics(forest: &Forest, rows: ArrayView2<'_, f64>, labels: &[f64]) -> Result<Metrics> {
    let preds = forest.predict(rows)?;
    match forest.task() {
        Task::Regression => Ok(metrics(&preds.column(0).to_vec(), labels)?),
        task @ Task::Classification { .. } => {
            let errors: Vec<f64> = preds
                .outer_iter()
                .zip(labels)
                .map(|(p, &y)| explain::abs_error(task, y, p.as_slice().unwrap()))
                .collect();
            Ok(metrics(&errors, &vec![0.0; errors.len()])?)
        }
    }
}

fn oob_metrics(forest: &Forest) -> Option<Metrics> {
    let errors: Vec<f64> = TrainingErrors::compute(forest, TrainingErrorMode::OutOfBag)
        .errors
        .into_iter()
        .flatten()
        .collect();
    metrics(&errors, &vec![0.0; errors.len()]).ok()
}

fn resolve_task(kind: TaskKind, ds: &Dataset) -> Result<Task> {
    match kind {
        TaskKind::Regression => {
            if ds.target_labels.is_some() {
                bail!("target column `{}` is not numeric; use --task classification", ds.target_name);
            }
            Ok(Task::Regression)
        }
        TaskKind::Classification => {
            let n_classes = match &ds.target_labels {
                Some(labels) => labels.len(),
                None => {
                    if ds.target.iter().any(|&y| y < 0.0 || y.fract() != 0.0) {
                        bail!("numeric class labels must be nonnegative integers");
                    }
                    ds.target.iter().fold(0.0f64, |m, &y| m.max(y)) as usize + 1
                }
            };
            if n_classes < 2 {
                bail!("classification needs at least two classes");
            }
            Ok(Task::Classification { n_classes })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub model: PathBuf,
    pub manifest: PathBuf,
    pub params: ForestParams,
    pub n_train: usize,
    pub n_test: usize,
    pub train_metrics: Metrics,
    pub oob_metrics: Option<Metrics>,
    pub test_metrics: Option<Metrics>,
    pub search: Option<SearchResult>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome> {
    let mut manifest = ManifestBuilder::new("train");
    let ds = match (&args.data, &args.synthetic_config) {
        (Some(path), _) => {
            manifest.input(path)?;
            let target = args.target.as_deref().context("--target is required with --data")?;
            data::load_csv(path, target, args.timestamp.as_deref())?
        }
        (None, Some(path)) => {
            manifest.input(path)?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let ds = generate_synthetic(&SyntheticConfig::from_key_values(&text)?)?;
            if let Some(target) = &args.target {
                if target != &ds.target_name {
                    bail!("missing column `{target}`");
                }
            }
            ds
        }
        (None, None) => bail!("either --data or --synthetic-config is required"),
    };
    if ds.dropped_rows > 0 {
        log::warn!("dropped {} rows with missing or unparseable cells", ds.dropped_rows);
    }
    let task = resolve_task(args.task, &ds)?;
    let (train, test) = match args.train_fraction {
        Some(f) => {
            let (a, b) = data::time_split(&ds, f)?;
            (a, Some(b))
        }
        None => (ds, None),
    };

    let mut params = ForestParams {
        n_estimators: args.trees,
        max_depth: args.max_depth,
        max_features: args.max_features.parse::<MaxFeatures>()?,
        min_samples_leaf: args.min_samples_leaf,
        bootstrap: !args.no_bootstrap,
        seed: args.seed,
    };
    let mut search = None;
    if let Some(path) = &args.search_config {
        manifest.input(path)?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: SearchConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        log::info!("searching {} candidates over {} folds", cfg.n_samples, cfg.n_folds);
        let result = randomized_search(
            train.features_view(),
            &train.target,
            task,
            &cfg.distributions,
            cfg.n_samples,
            cfg.n_folds,
            args.seed,
        )?;
        println!(
            "search: best candidate {} of {} (mean fold rmse {:.6})",
            result.best_index,
            result.candidates.len(),
            result.candidates[result.best_index].mean_rmse.unwrap_or(f64::NAN)
        );
        params = ForestParams {
            bootstrap: !args.no_bootstrap,
            ..result.best.clone()
        };
        search = Some(result);
    }

    log::info!("fitting {} trees on {} rows", params.n_estimators, train.n_rows());
    let forest = Forest::fit(&train, task, &params)?;
    let train_metrics = task_metrics(&forest, train.features_view(), &train.target)?;
    let oob = oob_metrics(&forest);
    println!("train rmse={:.6} mae={:.6}", train_metrics.rmse, train_metrics.mae);
    if let Some(m) = oob {
        println!("oob   rmse={:.6} mae={:.6}", m.rmse, m.mae);
    }
    let mut test_metrics = None;
    if let Some(test) = &test {
        let m = task_metrics(&forest, test.features_view(), &test.target)?;
        println!("test  rmse={:.6} mae={:.6}", m.rmse, m.mae);
        test_metrics = Some(m);
        if let Some(path) = &args.test_out {
            test.write_csv(path)?;
            manifest.output(path);
        }
    }

    let n_train = train.n_rows();
    ModelFile::new(forest, Some(train.schema())).save(&args.model)?;
    manifest.output(&args.model);
    println!("saved model to {}", args.model.display());

    let config = serde_json::json!({ "args": args, "params": params, "task": task });
    let manifest_path = manifest.finish(config, Some(args.seed), &suffixed(&args.model, ".manifest.json"))?;
    Ok(TrainOutcome {
        model: args.model.clone(),
        manifest: manifest_path,
        params,
        n_train,
        n_test: test.as_ref().map_or(0, |t| t.n_rows()),
        train_metrics,
        oob_metrics: oob,
        test_metrics,
        search,
    })
}

fn load_model(path: &Path) -> Result<(Forest, Schema)> {
    let file = ModelFile::load(path)?;
    let schema = file
        .schema
        .with_context(|| format!("model {} carries no column schema", path.display()))?;
    Ok((file.forest, schema))
}

fn load_queries(schema: &Schema, path: &Path) -> Result<EncodedRows> {
    let raw = RawTable::read_csv(path)?;
    let rows = data::encode_rows(schema, &raw)?;
    if rows.dropped_rows > 0 {
        log::warn!("dropped {} query rows with missing or unparseable cells", rows.dropped_rows);
    }
    if rows.features.nrows() == 0 {
        bail!("no usable rows in {}", path.display());
    }
    Ok(rows)
}

fn select_rows(features: &Array2<f64>, indices: &[usize]) -> Array2<f64> {
    features.select(Axis(0), indices)
}

fn neighbor_thresholds(threshold: f64) -> Vec<f64> {
    let mut t: Vec<f64> = DEFAULT_THRESHOLDS.to_vec();
    if !t.contains(&threshold) {
        t.push(threshold);
        t.sort_by(f64::total_cmp);
    }
    t
}

fn curve_rows(curve: &CumulativeWeightCurve) -> Vec<Vec<String>> {
    curve
        .weights
        .iter()
        .zip(&curve.cumulative)
        .enumerate()
        .map(|(k, (w, c))| vec![(k + 1).to_string(), w.to_string(), c.to_string()])
        .collect()
}

fn histogram_rows(h: &LabelHistogram) -> Vec<Vec<String>> {
    (0..h.counts.len())
        .map(|b| {
            let mut row = vec![h.edges[b].to_string(), h.edges[b + 1].to_string(), h.counts[b].to_string()];
            if let Some(w) = &h.weighted {
                row.push(w[b].to_string());
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExplainOutcome {
    /// Query row indices (positions among the usable rows of the query file) that were explained.
    pub query_ids: Vec<usize>,
    pub reports: Vec<PathBuf>,
    pub neighbors_needed: NeighborsNeeded,
    pub manifest: PathBuf,
}

pub fn cmd_explain(args: &ExplainArgs) -> Result<ExplainOutcome> {
    if !(args.threshold > 0.0 && args.threshold <= 1.0) {
        bail!("--threshold must lie in (0, 1], got {}", args.threshold);
    }
    let mut manifest = ManifestBuilder::new("explain");
    manifest.input(&args.model)?;
    manifest.input(&args.data)?;
    let (forest, schema) = load_model(&args.model)?;
    let queries = load_queries(&schema, &args.data)?;
    let n = queries.features.nrows();

    let query_ids: Vec<usize> = match args.sample {
        Some(k) if k < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let mut ids = rand::seq::index::sample(&mut rng, n, k).into_vec();
            ids.sort_unstable();
            ids
        }
        _ => (0..n).collect(),
    };
    let features = select_rows(&queries.features, &query_ids);
    let labels: Option<Vec<f64>> = queries.labels.as_ref().map(|l| query_ids.iter().map(|&i| l[i]).collect());

    let options = ExplainOptions {
        error_mode: if args.in_bag_errors { TrainingErrorMode::InBag } else { TrainingErrorMode::OutOfBag },
        ..ExplainOptions::default()
    };
    log::info!("explaining {} of {n} query rows", query_ids.len());
    let explainer = Explainer::new(&forest, options);
    let mut reports = explainer.explain_batch(features.view(), labels.as_deref(), args.threshold)?;
    for (report, &id) in reports.iter_mut().zip(&query_ids) {
        report.query_id = id;
    }
    let thresholds = neighbor_thresholds(args.threshold);
    let needed = NeighborsNeeded::from_curves(
        reports.iter().map(|r| CumulativeWeightCurve::from_weights(&r.curve.weights, &thresholds)).collect(),
        &thresholds,
    )?;

    create_dir(&args.out)?;
    let mut report_paths = Vec::new();
    for report in &reports {
        let id = report.query_id;
        let path = args.out.join(format!("report_{id}.json"));
        write_json(&path, report)?;
        manifest.output(&path);
        report_paths.push(path);
        let path = args.out.join(format!("curve_{id}.csv"));
        write_csv(&path, &["rank", "weight", "cumulative"], curve_rows(&report.curve))?;
        manifest.output(&path);
        let path = args.out.join(format!("neighbor_hist_{id}.csv"));
        write_csv(&path, &["bin_low", "bin_high", "count", "weight"], histogram_rows(&report.neighbor_label_histogram))?;
        manifest.output(&path);
    }
    let path = args.out.join("train_hist.csv");
    write_csv(&path, &["bin_low", "bin_high", "count"], histogram_rows(explainer.train_histogram()))?;
    manifest.output(&path);

    let path = args.out.join("neighbors_needed.csv");
    write_csv(
        &path,
        &["threshold", "mean", "median"],
        (0..thresholds.len()).map(|t| vec![thresholds[t].to_string(), needed.mean[t].to_string(), needed.median[t].to_string()]),
    )?;
    manifest.output(&path);
    let path = args.out.join("neighbors_needed_per_query.csv");
    let header: Vec<String> = std::iter::once("query_id".to_string())
        .chain(thresholds.iter().map(|t| format!("n_{t}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &path,
        &header,
        needed.per_query.iter().zip(&query_ids).map(|(counts, id)| {
            std::iter::once(id.to_string()).chain(counts.iter().map(|c| c.to_string())).collect()
        }),
    )?;
    manifest.output(&path);
    let path = args.out.join("mean_curve.csv");
    write_csv(
        &path,
        &["k", "mean_cumulative"],
        needed.mean_curve().iter().enumerate().map(|(k, c)| vec![(k + 1).to_string(), c.to_string()]),
    )?;
    manifest.output(&path);

    for (t, m) in thresholds.iter().zip(&needed.mean) {
        println!("neighbors for weight {t}: mean {m:.1}");
    }
    println!("wrote {} reports to {}", reports.len(), args.out.display());
    let config = serde_json::json!({ "args": args, "options": options, "thresholds": thresholds });
    let manifest_path = manifest.finish(config, Some(args.seed), &args.out.join("manifest.json"))?;
    Ok(ExplainOutcome {
        query_ids,
        reports: report_paths,
        neighbors_needed: needed,
        manifest: manifest_path,
    })
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub report: ReconstructionReport,
    pub exit_code: i32,
    pub manifest: PathBuf,
}

/// Exit code is 0 only when every GAP reconstruction is within `tolerance`
/// of the prediction. A tolerance of 0 can fail on floating-point rounding
/// of the accumulated sums.
pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyOutcome> {
    let mut manifest = ManifestBuilder::new("verify");
    manifest.input(&args.model)?;
    manifest.input(&args.data)?;
    let (forest, schema) = load_model(&args.model)?;
    let queries = load_queries(&schema, &args.data)?;
    let report = verify_reconstruction(&forest, queries.features.view(), args.tolerance)?;
    println!("queries: {}", report.n_queries);
    println!("max GAP error: {:e}", report.max_abs_gap_error);
    println!("max Breiman error: {:e}", report.max_abs_breiman_error);
    println!("GAP exact within {:e}: {}", args.tolerance, report.gap_exact);

    let (report_path, manifest_path) = match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            (dir.join("verify_report.json"), dir.join("manifest.json"))
        }
        None => (suffixed(&args.model, ".verify.json"), suffixed(&args.model, ".verify.manifest.json")),
    };
    write_json(&report_path, &report)?;
    manifest.output(&report_path);
    let exit_code = if report.gap_exact { EXIT_OK } else { EXIT_VERIFY_FAILED };
    let config = serde_json::json!({ "args": args });
    let manifest = manifest.finish(config, None, &manifest_path)?;
    Ok(VerifyOutcome {
        report,
        exit_code,
        manifest,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub summary: EvalSummary,
    pub pearson_per_point: Option<f64>,
    pub pearson_decile_means: Option<f64>,
    pub deciles: Vec<explain::DecileRow>,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub points: Vec<explain::ConfidencePoint>,
    pub manifest: PathBuf,
}

fn baseline_column(raw: &RawTable, kept: &[usize], name: &str) -> Result<Vec<f64>> {
    let col = raw
        .header
        .iter()
        .position(|h| h == name)
        .with_context(|| format!("missing column `{name}`"))?;
    kept.iter()
        .map(|&r| {
            let cell = raw.rows[r].get(col).map(String::as_str).unwrap_or("");
            cell.trim()
                .parse::<f64>()
                .with_context(|| format!("baseline column `{name}` row {}: `{cell}` is not a number", r + 1))
        })
        .collect()
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalOutcome> {
    let mut manifest = ManifestBuilder::new("eval");
    manifest.input(&args.model)?;
    manifest.input(&args.data)?;
    let (forest, schema) = load_model(&args.model)?;
    let raw = RawTable::read_csv(&args.data)?;
    let rows = data::encode_rows(&schema, &raw)?;
    let labels = rows
        .labels
        .clone()
        .with_context(|| format!("missing column `{}`", schema.target))?;
    if labels.is_empty() {
        bail!("no usable rows in {}", args.data.display());
    }
    let task = forest.task();
    let preds = forest.predict(rows.features.view())?;
    let summary = match task {
        Task::Regression => {
            let baseline = args
                .baseline
                .as_deref()
                .map(|name| baseline_column(&raw, &rows.kept_rows, name))
                .transpose()?;
            EvalSummary::new(&preds.column(0).to_vec(), &labels, baseline.as_deref())?
        }
        Task::Classification { .. } => {
            if args.baseline.is_some() {
                bail!("--baseline applies to regression models only");
            }
            let errors: Vec<f64> = preds
                .outer_iter()
                .zip(&labels)
                .map(|(p, &y)| explain::abs_error(task, y, p.as_slice().unwrap()))
                .collect();
            EvalSummary::new(&errors, &vec![0.0; errors.len()], None)?
        }
    };
    let options = ExplainOptions {
        error_mode: if args.in_bag_errors { TrainingErrorMode::InBag } else { TrainingErrorMode::OutOfBag },
        ..ExplainOptions::default()
    };
    let explainer = Explainer::new(&forest, options);
    let table = confidence_vs_error(&explainer, rows.features.view(), &labels, args.deciles)?;

    println!("rows: {}", summary.n_rows);
    println!("model rmse={:.6} mae={:.6}", summary.model.rmse, summary.model.mae);
    if let (Some(b), Some(pct)) = (summary.baseline, summary.improvement_pct) {
        println!("baseline rmse={:.6} mae={:.6} improvement={pct:.2}%", b.rmse, b.mae);
    }
    let show = |v: Option<f64>| v.map_or("undefined".to_string(), |c| format!("{c:.4}"));
    println!("pearson(weighted train mae, test error): per point {}, decile means {}", show(table.pearson_per_point), show(table.pearson_decile_means));

    create_dir(&args.out)?;
    let report = EvalReport {
        summary,
        pearson_per_point: table.pearson_per_point,
        pearson_decile_means: table.pearson_decile_means,
        deciles: table.deciles.clone(),
    };
    let path = args.out.join("eval_summary.json");
    write_json(&path, &report)?;
    manifest.output(&path);
    let path = args.out.join("decile_table.csv");
    write_csv(
        &path,
        &["decile", "n", "mean_weighted_mae", "mean_abs_error"],
        table.deciles.iter().map(|d| {
            vec![d.decile.to_string(), d.n.to_string(), d.mean_weighted_mae.to_string(), d.mean_abs_error.to_string()]
        }),
    )?;
    manifest.output(&path);
    let path = args.out.join("confidence_points.csv");
    write_csv(
        &path,
        &["query_id", "weighted_mae", "abs_error"],
        table.points.iter().map(|p| vec![p.query_id.to_string(), p.weighted_mae.to_string(), p.abs_error.to_string()]),
    )?;
    manifest.output(&path);

    let config = serde_json::json!({ "args": args, "options": options });
    let manifest = manifest.finish(config, None, &args.out.join("manifest.json"))?;
    Ok(EvalOutcome {
        report,
        points: table.points,
        manifest,
    })
}
