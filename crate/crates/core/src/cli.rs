//! The `slimtsf` command line.
//!
//! Every subcommand wraps one library operation, writes its outputs under
//! `--out`, and leaves a `run_manifest.json` next to them. Settings resolve
//! as flags, then the `--config` JSON file, then built-in defaults. Errors
//! go to stderr as one JSON object and map to exit codes 1 (internal),
//! 2 (usage or missing input), 3 (data validation) and 4 (undefined score).

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    ex_ante_evaluate_matrices, read_runs, run_bootstrap_matrices, summarize_campaign, write_campaigns,
    write_errorbars, write_participation, write_skill_table, BootstrapConfig, BootstrapSummary, KRule,
    CONFIG_FILE, ERRORBARS_FILE, PARTICIPATION_FILE, RUNS_FILE, SUMMARY_FILE,
};
use crate::data::{impute_dataset, load_dataset, write_dataset, Dataset, ImputePolicy, IngestSchema};
use crate::error::{Error, Result};
use crate::features::{
    featurize_dataset, project_columns, read_feature_matrix, write_feature_matrix, FeatureDescriptor,
    FeatureMatrix, ScaleGrid,
};
use crate::forest::{train_forest, ForestModel, ForestParams, MaxFeatures};
use crate::io_util::{write_csv, write_json};
use crate::metrics::{contingency, format_score, ScoreSet};
use crate::ranking::{
    counting_vector, rank_features, select_final, top_k, write_counting_csv, write_participation_csv,
    write_ranking_csv, write_sfs_csv, FeatureRanking, SfsVector,
};
use crate::selection::{grid_search, make_fold_plan, write_registry, FoldScheme, Scorer, SearchGrid};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Parser)]
#[command(name = "slimtsf", version, about = "Sliding-window multivariate time series forest")]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a manifest and its series, impute gaps, write a dataset bundle.
    Ingest(IngestArgs),
    /// Compute the fused sliding-window feature matrix of a bundle.
    Featurize(FeaturizeArgs),
    /// Train one forest on a feature matrix.
    Train(TrainArgs),
    /// Score a trained model on a feature matrix.
    Evaluate(EvaluateArgs),
    /// Partition-aware grid search with a model index.
    Tune(TuneArgs),
    /// Rank features of a model, or aggregate the selections of a campaign.
    Rank(RankArgs),
    /// Run a bootstrap campaign per class weight.
    Bootstrap(BootstrapArgs),
    /// Regenerate plot-ready CSVs from a campaign directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Manifest file, or a directory containing manifest.json.
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub impute_policy: Option<ImputePolicy>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Scales as "w:s,w:s"; default derives three scales from the series length.
    #[arg(long)]
    pub windows: Option<ScaleGrid>,
}

#[derive(Debug, Default, Args)]
pub struct ForestArgs {
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long, conflicts_with = "unlimited_depth")]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub unlimited_depth: bool,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    /// sqrt, log2, all or a count.
    #[arg(long)]
    pub max_features: Option<MaxFeatures>,
    /// Weight of flaring samples.
    #[arg(long)]
    pub class_weight: Option<f64>,
    /// Train every tree on all rows instead of a bootstrap sample.
    #[arg(long)]
    pub no_row_bootstrap: bool,
}

impl ForestArgs {
    fn apply(&self, mut p: ForestParams) -> ForestParams {
        if let Some(v) = self.n_trees {
            p.n_trees = v;
        }
        if self.unlimited_depth {
            p.max_depth = None;
        } else if let Some(v) = self.max_depth {
            p.max_depth = Some(v);
        }
        if let Some(v) = self.min_samples_leaf {
            p.min_samples_leaf = v;
        }
        if let Some(v) = self.max_features {
            p.max_features = v;
        }
        if let Some(v) = self.class_weight {
            p.class_weight_positive = v;
        }
        if self.no_row_bootstrap {
            p.bootstrap_rows = false;
        }
        p
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature directory written by `featurize`.
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Train only on these partitions.
    #[arg(long, value_delimiter = ',')]
    pub partitions: Vec<String>,
    #[command(flatten)]
    pub forest: ForestArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub features: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub partitions: Vec<String>,
    /// Score at or above which an instance is called flaring.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// One scale grid per flag, e.g. `--windows 12:6 --windows 12:6,20:10`.
    #[arg(long)]
    pub windows: Vec<ScaleGrid>,
    #[arg(long, value_delimiter = ',')]
    pub class_weights: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub n_trees: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub max_depths: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub min_samples_leaf: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub max_features: Vec<MaxFeatures>,
    /// tss, hss or wtss:<alpha>.
    #[arg(long)]
    pub scorer: Option<Scorer>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["model", "campaign"]))]
pub struct RankArgs {
    /// Rank the importances of one model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Aggregate the per-run selections of a bootstrap campaign.
    #[arg(long)]
    pub campaign: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// log2 or a count.
    #[arg(long)]
    pub k: Option<KRule>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Feature directory holding the training rows (and the test rows when
    /// `--test-features` is absent).
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub test_features: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub train_partitions: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub test_partitions: Vec<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub without_replacement: bool,
    /// One campaign per value.
    #[arg(long, value_delimiter = ',')]
    pub class_weights: Vec<f64>,
    #[arg(long)]
    pub k: Option<KRule>,
    #[arg(long)]
    pub final_k: Option<KRule>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Also retrain on the final selection and on all features and score both.
    #[arg(long)]
    pub ex_ante: bool,
    #[command(flatten)]
    pub forest: ForestArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub campaign: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// The `--config` file. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub impute_policy: Option<ImputePolicy>,
    pub schema: Option<IngestSchema>,
    pub windows: Option<ScaleGrid>,
    pub forest: Option<ForestParams>,
    pub threshold: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub train_partitions: Option<Vec<String>>,
    pub test_partitions: Option<Vec<String>>,
    pub search: Option<SearchGrid>,
    pub folds: Option<FoldScheme>,
    pub bootstrap: Option<BootstrapConfig>,
    pub k: Option<KRule>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Argument(format!("config {}: {e}", path.display())))
    }
}

/// Written next to every command's outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub workers: Option<usize>,
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
    pub duration_ms: u128,
}

struct Context {
    seed: u64,
    workers: Option<usize>,
    file: FileConfig,
    started: Instant,
}

impl Context {
    fn finish(
        &self,
        command: &str,
        inputs: &[&Path],
        out: &Path,
        outputs: &[&str],
        config: &impl Serialize,
    ) -> Result<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            workers: self.workers,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            out_dir: out.to_path_buf(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            config: serde_json::to_value(config)?,
            duration_ms: self.started.elapsed().as_millis(),
        };
        write_json(&out.join(RUN_MANIFEST_FILE), &manifest)
    }
}

fn error_json(e: &Error) -> String {
    let mut obj = serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    });
    if let Error::MissingInput(p) | Error::Io { path: p, .. } = e {
        obj["path"] = serde_json::Value::String(p.display().to_string());
    }
    obj.to_string()
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let obj = serde_json::json!({
                "error": "usage",
                "message": e.to_string().trim(),
                "exit_code": 2,
            });
            eprintln!("{obj}");
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        workers: cli.workers.or(file.workers),
        file,
        started: Instant::now(),
    };
    let pool = match ctx.workers {
        Some(0) => return Err(Error::Argument("--workers must be at least 1".into())),
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Argument(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let command = cli.command;
    match pool {
        Some(pool) => pool.install(|| dispatch(&ctx, command)),
        None => dispatch(&ctx, command),
    }
}

fn dispatch(ctx: &Context, command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => cmd_ingest(ctx, &a),
        Command::Featurize(a) => cmd_featurize(ctx, &a),
        Command::Train(a) => cmd_train(ctx, &a),
        Command::Evaluate(a) => cmd_evaluate(ctx, &a),
        Command::Tune(a) => cmd_tune(ctx, &a),
        Command::Rank(a) => cmd_rank(ctx, &a),
        Command::Bootstrap(a) => cmd_bootstrap(ctx, &a),
        Command::Report(a) => cmd_report(ctx, &a),
    }
}

fn nonempty<T: Clone>(flag: &[T], file: Option<&Vec<T>>) -> Option<Vec<T>> {
    if !flag.is_empty() {
        Some(flag.to_vec())
    } else {
        file.cloned()
    }
}

fn restrict_rows(fm: FeatureMatrix, partitions: &[String]) -> Result<FeatureMatrix> {
    if partitions.is_empty() {
        return Ok(fm);
    }
    let parts: BTreeSet<String> = partitions.iter().cloned().collect();
    let known: BTreeSet<String> = fm.partition_ids().iter().cloned().collect();
    if let Some(p) = parts.iter().find(|p| !known.contains(*p)) {
        return Err(Error::Argument(format!("unknown partition {p}")));
    }
    Ok(fm.select_rows(&fm.rows_in_partitions(&parts)))
}

fn cmd_ingest(ctx: &Context, a: &IngestArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Resolved<'a> {
        impute_policy: ImputePolicy,
        schema: &'a IngestSchema,
    }
    let schema = ctx.file.schema.clone().unwrap_or_default();
    let policy = a.impute_policy.or(ctx.file.impute_policy).unwrap_or_default();
    let raw = load_dataset(&a.manifest, &schema)?;
    let (ds, report) = impute_dataset(&raw, policy)?;
    write_dataset(&ds, &a.out)?;
    write_json(&a.out.join("impute_report.json"), &report)?;
    ctx.finish(
        "ingest",
        &[&a.manifest],
        &a.out,
        &["manifest.json", "instances/", "impute_report.json"],
        &Resolved { impute_policy: policy, schema: &schema },
    )
}

fn load_bundle(path: &Path) -> Result<Dataset> {
    load_dataset(path, &IngestSchema::default())
}

fn cmd_featurize(ctx: &Context, a: &FeaturizeArgs) -> Result<()> {
    let ds = load_bundle(&a.bundle)?;
    let grid = match a.windows.clone().or_else(|| ctx.file.windows.clone()) {
        Some(g) => g,
        None => ScaleGrid::default_for(
            ds.uniform_timesteps()
                .ok_or_else(|| Error::Validation("series lengths differ across instances".into()))?,
        )?,
    };
    let fm = featurize_dataset(&ds, &grid)?;
    write_feature_matrix(&fm, &a.out)?;
    ctx.finish(
        "featurize",
        &[&a.bundle],
        &a.out,
        &[crate::features::FEATURES_FILE, crate::features::DESCRIPTORS_FILE],
        &serde_json::json!({ "windows": grid.to_string(), "n_features": fm.n_features(), "n_rows": fm.n_rows() }),
    )
}

fn cmd_train(ctx: &Context, a: &TrainArgs) -> Result<()> {
    let partitions = nonempty(&a.partitions, ctx.file.train_partitions.as_ref()).unwrap_or_default();
    let fm = restrict_rows(read_feature_matrix(&a.features)?, &partitions)?;
    let mut params = a.forest.apply(ctx.file.forest.clone().unwrap_or_default());
    params.seed = ctx.seed;
    let model = train_forest(&fm, &params)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    model.save(&a.out.join(MODEL_FILE))?;
    write_ranking_csv(&FeatureRanking::from_model(&model)?, &a.out.join("importances.csv"))?;
    ctx.finish(
        "train",
        &[&a.features],
        &a.out,
        &[MODEL_FILE, "importances.csv"],
        &serde_json::json!({ "forest": params, "partitions": partitions }),
    )
}

fn cmd_evaluate(ctx: &Context, a: &EvaluateArgs) -> Result<()> {
    let partitions = nonempty(&a.partitions, ctx.file.test_partitions.as_ref()).unwrap_or_default();
    let threshold = a.threshold.or(ctx.file.threshold).unwrap_or(0.5);
    let alphas = nonempty(&a.alphas, ctx.file.alphas.as_ref()).unwrap_or_else(|| vec![1.0]);
    let model = ForestModel::load(&a.model)?;
    let fm = restrict_rows(read_feature_matrix(&a.features)?, &partitions)?;
    let fm = project_columns(&fm, &model.feature_ids)?;

    let mut rows = Vec::with_capacity(fm.n_rows());
    let mut predicted = Vec::with_capacity(fm.n_rows());
    for r in 0..fm.n_rows() {
        let (label, score) = model.predict_with_threshold(fm.row(r), threshold)?;
        predicted.push(label);
        rows.push([
            fm.instance_ids()[r].clone(),
            fm.partition_ids()[r].clone(),
            fm.labels()[r].to_string(),
            label.to_string(),
            score.to_string(),
        ]);
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_csv(
        &a.out.join("predictions.csv"),
        &["instance_id", "partition_id", "label", "predicted", "score"],
        rows,
    )?;
    let scores = ScoreSet::from_table(contingency(fm.labels(), &predicted)?, &alphas)?;
    write_json(&a.out.join("skill.json"), &scores)?;
    ctx.finish(
        "evaluate",
        &[&a.features, &a.model],
        &a.out,
        &["predictions.csv", "skill.json"],
        &serde_json::json!({ "threshold": threshold, "alphas": alphas, "partitions": partitions }),
    )?;
    let undefined: Vec<String> = scores
        .named()
        .into_iter()
        .filter(|(_, v)| v.is_none())
        .map(|(n, _)| n)
        .collect();
    if !undefined.is_empty() {
        return Err(Error::UndefinedScore(format!(
            "{} undefined: the evaluated rows lack a class",
            undefined.join(", ")
        )));
    }
    Ok(())
}

fn cmd_tune(ctx: &Context, a: &TuneArgs) -> Result<()> {
    let ds = load_bundle(&a.bundle)?;
    let mut grid = ctx.file.search.clone().unwrap_or_default();
    if !a.windows.is_empty() {
        grid.scale_grids = a.windows.clone();
    }
    if grid.scale_grids.is_empty() {
        let t = ds
            .uniform_timesteps()
            .ok_or_else(|| Error::Validation("series lengths differ across instances".into()))?;
        grid.scale_grids = vec![match &ctx.file.windows {
            Some(g) => g.clone(),
            None => ScaleGrid::default_for(t)?,
        }];
    }
    if let Some(base) = &ctx.file.forest {
        if ctx.file.search.is_none() {
            grid.forest = crate::selection::ForestAxes::single(base);
        }
    }
    if !a.class_weights.is_empty() {
        grid.forest.class_weight_positive = a.class_weights.clone();
    }
    if !a.n_trees.is_empty() {
        grid.forest.n_trees = a.n_trees.clone();
    }
    if !a.max_depths.is_empty() {
        grid.forest.max_depth = a.max_depths.iter().map(|&d| Some(d)).collect();
    }
    if !a.min_samples_leaf.is_empty() {
        grid.forest.min_samples_leaf = a.min_samples_leaf.clone();
    }
    if !a.max_features.is_empty() {
        grid.forest.max_features = a.max_features.clone();
    }
    if let Some(s) = a.scorer {
        grid.scorer = s;
    }
    if let Some(al) = nonempty(&a.alphas, ctx.file.alphas.as_ref()) {
        grid.alphas = al;
    }
    let scheme = ctx.file.folds.clone().unwrap_or(FoldScheme::LeaveOnePartitionOut);
    let plan = make_fold_plan(&ds, &scheme)?;
    let outcome = grid_search(&ds, &grid, &plan, ctx.seed)?;
    write_registry(&a.out, &ds, &plan, &outcome)?;
    ctx.finish(
        "tune",
        &[&a.bundle],
        &a.out,
        &[crate::selection::INDEX_FILE, crate::selection::BEST_FILE, crate::selection::MODELS_DIR],
        &serde_json::json!({ "search": grid, "folds": plan }),
    )
}

fn cmd_rank(ctx: &Context, a: &RankArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let k_flag = a.k.or(ctx.file.k);
    if let Some(model_path) = &a.model {
        let model = ForestModel::load(model_path)?;
        let pairs: Vec<(String, f64)> = model
            .feature_ids
            .iter()
            .cloned()
            .zip(model.importances.iter().copied())
            .collect();
        let ranking = rank_features(&pairs)?;
        let k = k_flag.unwrap_or_default().resolve(ranking.len());
        let members = top_k(&ranking, k)?;
        write_ranking_csv(&ranking, &a.out.join("ranking.csv"))?;
        write_json(&a.out.join("top_k.json"), &members)?;
        return ctx.finish(
            "rank",
            &[model_path],
            &a.out,
            &["ranking.csv", "top_k.json"],
            &serde_json::json!({ "k": k }),
        );
    }
    let dir = a.campaign.as_ref().expect("clap requires model or campaign");
    let cfg = read_campaign_config(dir)?;
    let runs = read_runs(&dir.join(RUNS_FILE))?;
    let mut sfs = SfsVector::default();
    for m in runs.iter().filter_map(|r| r.selected.as_ref()) {
        sfs.add(m);
    }
    let n_features = read_summaries(dir)?.first().map_or(0, |s| s.n_features);
    let k = k_flag.unwrap_or(cfg.final_k).resolve(n_features);
    let descriptors = sfs
        .counts
        .keys()
        .map(|id| FeatureDescriptor::parse(id))
        .collect::<Result<Vec<_>>>()?;
    let final_set = select_final(&sfs, k)?;
    write_sfs_csv(&sfs, &a.out.join("sfs.csv"))?;
    write_counting_csv(&counting_vector(&sfs, &descriptors)?, &a.out.join("counting.csv"))?;
    write_participation_csv(
        &crate::bootstrap::pooled_participation(&runs)?,
        &a.out.join("participation.csv"),
    )?;
    write_json(&a.out.join("final_selection.json"), &final_set)?;
    ctx.finish(
        "rank",
        &[dir],
        &a.out,
        &["sfs.csv", "counting.csv", "participation.csv", "final_selection.json"],
        &serde_json::json!({ "k": k, "n_experiments": sfs.n_experiments }),
    )
}

#[derive(Serialize)]
struct ExAnte {
    class_weight: f64,
    selected: BTreeSet<String>,
    reduced: crate::metrics::SkillReport,
    all_features: crate::metrics::SkillReport,
}

fn cmd_bootstrap(ctx: &Context, a: &BootstrapArgs) -> Result<()> {
    let mut cfg = ctx.file.bootstrap.clone().unwrap_or_default();
    if let Some(f) = &ctx.file.forest {
        if ctx.file.bootstrap.is_none() {
            cfg.forest = f.clone();
        }
    }
    cfg.forest = a.forest.apply(cfg.forest);
    cfg.master_seed = ctx.seed;
    if let Some(n) = a.runs {
        cfg.n_runs = n;
    }
    if let Some(f) = a.fraction {
        cfg.subsample_fraction = f;
    }
    if a.without_replacement {
        cfg.sample_with_replacement = false;
    }
    if !a.class_weights.is_empty() {
        cfg.class_weights = a.class_weights.clone();
    }
    if let Some(k) = a.k {
        cfg.per_run_k = k;
    }
    if let Some(k) = a.final_k {
        cfg.final_k = k;
    }
    if let Some(al) = nonempty(&a.alphas, ctx.file.alphas.as_ref()) {
        cfg.alphas = al;
    }

    let all = read_feature_matrix(&a.features)?;
    cfg.scale_grid = Some(grid_of(&all)?);
    let train_parts = nonempty(&a.train_partitions, ctx.file.train_partitions.as_ref()).unwrap_or_default();
    let test_parts = nonempty(&a.test_partitions, ctx.file.test_partitions.as_ref()).unwrap_or_default();
    let (train, test) = match &a.test_features {
        Some(path) => {
            let test = restrict_rows(read_feature_matrix(path)?, &test_parts)?;
            let test = project_columns(&test, &all.feature_ids())?;
            (restrict_rows(all, &train_parts)?, test)
        }
        None => split_by_partitions(all, train_parts, test_parts)?,
    };
    let campaigns = run_bootstrap_matrices(&train, &test, &cfg)?;
    write_campaigns(&a.out, &cfg, &campaigns)?;
    let mut outputs = vec![CONFIG_FILE, RUNS_FILE, SUMMARY_FILE, ERRORBARS_FILE, PARTICIPATION_FILE];
    if a.ex_ante {
        let reports = campaigns
            .iter()
            .map(|c| {
                let params = ForestParams { class_weight_positive: c.class_weight, seed: cfg.master_seed, ..cfg.forest.clone() };
                let all_ids: BTreeSet<String> = train.feature_ids().into_iter().collect();
                Ok(ExAnte {
                    class_weight: c.class_weight,
                    selected: c.summary.final_selection.clone(),
                    reduced: ex_ante_evaluate_matrices(&train, &test, &c.summary.final_selection, &params, &cfg.alphas)?,
                    all_features: ex_ante_evaluate_matrices(&train, &test, &all_ids, &params, &cfg.alphas)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_json(&a.out.join("ex_ante.json"), &reports)?;
        outputs.push("ex_ante.json");
    }
    ctx.finish("bootstrap", &[&a.features], &a.out, &outputs, &cfg)
}

/// Scales present in a matrix, in first-seen order.
fn grid_of(fm: &FeatureMatrix) -> Result<ScaleGrid> {
    let mut seen = Vec::new();
    for d in fm.descriptors() {
        if !seen.contains(&d.scale) {
            seen.push(d.scale);
        }
    }
    ScaleGrid::new(seen)
}

/// Default split: the lexicographically last partition is the test set.
fn split_by_partitions(
    fm: FeatureMatrix,
    train: Vec<String>,
    test: Vec<String>,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let parts: BTreeSet<String> = fm.partition_ids().iter().cloned().collect();
    let test: BTreeSet<String> = if test.is_empty() {
        let last = parts
            .iter()
            .next_back()
            .ok_or_else(|| Error::Validation("feature matrix has no rows".into()))?;
        BTreeSet::from([last.clone()])
    } else {
        test.into_iter().collect()
    };
    let train: BTreeSet<String> = if train.is_empty() {
        parts.difference(&test).cloned().collect()
    } else {
        train.into_iter().collect()
    };
    if train.is_empty() {
        return Err(Error::Argument("need at least two partitions, or --test-features".into()));
    }
    if let Some(p) = train.intersection(&test).next() {
        return Err(Error::Argument(format!("partition {p} is on both sides")));
    }
    if let Some(p) = train.union(&test).find(|p| !parts.contains(*p)) {
        return Err(Error::Argument(format!("unknown partition {p}")));
    }
    Ok((
        fm.select_rows(&fm.rows_in_partitions(&train)),
        fm.select_rows(&fm.rows_in_partitions(&test)),
    ))
}

fn read_campaign_config(dir: &Path) -> Result<BootstrapConfig> {
    let path = dir.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn read_summaries(dir: &Path) -> Result<Vec<BootstrapSummary>> {
    let path = dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn cmd_report(ctx: &Context, a: &ReportArgs) -> Result<()> {
    let missing: Vec<&str> = [CONFIG_FILE, RUNS_FILE, SUMMARY_FILE]
        .into_iter()
        .filter(|f| !a.campaign.join(f).is_file())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "incomplete campaign {}: missing {}",
            a.campaign.display(),
            missing.join(", ")
        )));
    }
    let cfg = read_campaign_config(&a.campaign)?;
    let runs = read_runs(&a.campaign.join(RUNS_FILE))?;
    let stored = read_summaries(&a.campaign)?;

    // Rebuild every summary from the raw runs and insist they agree.
    let mut by_cw: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for r in &runs {
        by_cw.entry(r.class_weight.to_string()).or_default().push(r.clone());
    }
    let mut summaries = Vec::with_capacity(stored.len());
    for s in &stored {
        let group = by_cw.remove(&s.class_weight.to_string()).unwrap_or_default();
        let again = summarize_campaign(&group, s.class_weight, s.n_features, cfg.final_k)?;
        if &again != s {
            return Err(Error::Validation(format!(
                "summary for cw {} does not match runs.jsonl",
                s.class_weight
            )));
        }
        summaries.push(again);
    }
    if !by_cw.is_empty() {
        return Err(Error::Validation("runs.jsonl has runs with no summary".into()));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_errorbars(&a.out.join(ERRORBARS_FILE), &summaries)?;
    write_participation(&a.out.join(PARTICIPATION_FILE), &summaries)?;
    write_skill_table(&a.out.join("skill_tables.csv"), &runs)?;
    ctx.finish(
        "report",
        &[&a.campaign],
        &a.out,
        &[ERRORBARS_FILE, PARTICIPATION_FILE, "skill_tables.csv"],
        &serde_json::json!({ "campaigns": summaries.len(), "runs": runs.len(),
            "failed_runs": summaries.iter().map(|s| s.n_failed).sum::<usize>(),
            "test_tss": summaries.iter().map(|s| format_score(s.metric("tss", "test").and_then(|m| m.mean))).collect::<Vec<_>>() }),
    )
}
