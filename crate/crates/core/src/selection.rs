//! Partition-aware hyperparameter search and a content-addressed model index.
//!
//! Folds follow the dataset's time-segmented partitions, so a partition is
//! always entirely on one side of a fold. Every grid point is identified by
//! the SHA-256 digest of its canonical JSON config.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::{featurize_dataset, select_columns, FeatureMatrix, ScaleGrid};
use crate::forest::{train_forest, ForestModel, ForestParams, MaxFeatures};
use crate::io_util::{write_atomic, write_json};
use crate::metrics::{contingency, weighted_tss, ScoreSet};

pub const INDEX_FILE: &str = "index.jsonl";
pub const BEST_FILE: &str = "best.json";
pub const MODELS_DIR: &str = "models";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionFoldPlan {
    folds: Vec<Fold>,
}

impl PartitionFoldPlan {
    pub fn folds(&self) -> &[Fold] {
        &self.folds
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Every partition the plan touches.
    pub fn partitions(&self) -> BTreeSet<String> {
        self.folds
            .iter()
            .flat_map(|f| f.train.iter().chain(&f.validation).cloned())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    LeaveOnePartitionOut,
    Explicit(Vec<Fold>),
}

pub fn make_fold_plan(ds: &Dataset, scheme: &FoldScheme) -> Result<PartitionFoldPlan> {
    let parts = ds.partitions();
    if parts.len() < 2 {
        return Err(Error::Argument(format!(
            "partition-aware folds need at least 2 partitions, found {}",
            parts.len()
        )));
    }
    let folds = match scheme {
        FoldScheme::LeaveOnePartitionOut => parts
            .iter()
            .map(|p| Fold {
                train: parts.iter().filter(|q| *q != p).cloned().collect(),
                validation: BTreeSet::from([p.clone()]),
            })
            .collect(),
        FoldScheme::Explicit(folds) => {
            if folds.is_empty() {
                return Err(Error::Argument("explicit fold list is empty".into()));
            }
            for (i, f) in folds.iter().enumerate() {
                if f.train.is_empty() || f.validation.is_empty() {
                    return Err(Error::Argument(format!("fold {i} has an empty side")));
                }
                if let Some(p) = f.train.intersection(&f.validation).next() {
                    return Err(Error::Argument(format!("fold {i}: partition {p} is on both sides")));
                }
                if let Some(p) = f.train.union(&f.validation).find(|p| !parts.contains(*p)) {
                    return Err(Error::Argument(format!("fold {i}: unknown partition {p}")));
                }
            }
            folds.clone()
        }
    };
    Ok(PartitionFoldPlan { folds })
}

/// The skill score a search maximises.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scorer {
    #[default]
    Tss,
    Hss,
    Wtss(f64),
}

impl Scorer {
    pub fn score(&self, scores: &ScoreSet) -> Option<f64> {
        match *self {
            Scorer::Tss => scores.tss,
            Scorer::Hss => scores.hss,
            Scorer::Wtss(a) => weighted_tss(&scores.table, a).ok(),
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scorer::Tss => f.write_str("tss"),
            Scorer::Hss => f.write_str("hss"),
            Scorer::Wtss(a) => write!(f, "wtss:{a}"),
        }
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tss" => Ok(Scorer::Tss),
            "hss" => Ok(Scorer::Hss),
            other => {
                let alpha = other
                    .strip_prefix("wtss:")
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| Error::Argument(format!("unknown scorer {other:?}")))?;
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(Error::Argument(format!("alpha {alpha} outside (0, 2)")));
                }
                Ok(Scorer::Wtss(alpha))
            }
        }
    }
}

impl TryFrom<String> for Scorer {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scorer> for String {
    fn from(s: Scorer) -> String {
        s.to_string()
    }
}

/// One list of candidate values per forest hyperparameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestAxes {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
    pub class_weight_positive: Vec<f64>,
    pub bootstrap_rows: Vec<bool>,
}

impl Default for ForestAxes {
    fn default() -> Self {
        Self::single(&ForestParams::default())
    }
}

impl ForestAxes {
    pub fn single(p: &ForestParams) -> Self {
        Self {
            n_trees: vec![p.n_trees],
            max_depth: vec![p.max_depth],
            min_samples_leaf: vec![p.min_samples_leaf],
            max_features: vec![p.max_features],
            class_weight_positive: vec![p.class_weight_positive],
            bootstrap_rows: vec![p.bootstrap_rows],
        }
    }

    fn expand(&self, seed: u64) -> Vec<ForestParams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &min_samples_leaf in &self.min_samples_leaf {
                    for &max_features in &self.max_features {
                        for &class_weight_positive in &self.class_weight_positive {
                            for &bootstrap_rows in &self.bootstrap_rows {
                                out.push(ForestParams {
                                    n_trees,
                                    max_depth,
                                    min_samples_leaf,
                                    max_features,
                                    class_weight_positive,
                                    bootstrap_rows,
                                    seed,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn is_complete(&self) -> bool {
        !(self.n_trees.is_empty()
            || self.max_depth.is_empty()
            || self.min_samples_leaf.is_empty()
            || self.max_features.is_empty()
            || self.class_weight_positive.is_empty()
            || self.bootstrap_rows.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchGrid {
    pub scale_grids: Vec<ScaleGrid>,
    pub forest: ForestAxes,
    /// `None` means every feature of the scale grid.
    pub feature_sets: Vec<Option<BTreeSet<String>>>,
    /// Weighted-TSS alphas recorded for every fold.
    pub alphas: Vec<f64>,
    pub scorer: Scorer,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            scale_grids: Vec::new(),
            forest: ForestAxes::default(),
            feature_sets: vec![None],
            alphas: vec![1.0],
            scorer: Scorer::Tss,
        }
    }
}

/// Everything that determines a trained model; hashed into the digest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPointConfig {
    pub scale_grid: ScaleGrid,
    pub forest: ForestParams,
    pub features: Option<BTreeSet<String>>,
}

impl SearchGrid {
    pub fn validate(&self) -> Result<()> {
        if self.scale_grids.is_empty() || self.feature_sets.is_empty() || !self.forest.is_complete() {
            return Err(Error::Argument("search grid has an empty axis".into()));
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a < 2.0) {
                return Err(Error::Argument(format!("alpha {a} outside (0, 2)")));
            }
        }
        Ok(())
    }

    /// Grid points in a fixed order: scale grid, feature set, then forest axes.
    pub fn points(&self, seed: u64) -> Vec<GridPointConfig> {
        let forests = self.forest.expand(seed);
        let mut out = Vec::new();
        for scale_grid in &self.scale_grids {
            for features in &self.feature_sets {
                for forest in &forests {
                    out.push(GridPointConfig {
                        scale_grid: scale_grid.clone(),
                        forest: forest.clone(),
                        features: features.clone(),
                    });
                }
            }
        }
        out
    }
}

/// SHA-256 over compact JSON with object keys sorted.
pub fn config_digest<T: Serialize + ?Sized>(config: &T) -> Result<String> {
    let value = canonical(serde_json::to_value(config)?);
    let text = serde_json::to_string(&value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

fn canonical(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, canonical(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        Value::Number(n) => match n.as_f64() {
            // -0.0 and 0.0 hash alike.
            Some(f) if f == 0.0 && n.is_f64() => Value::from(0.0),
            _ => Value::Number(n),
        },
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub validation: BTreeSet<String>,
    /// `None` when the scorer is undefined on this fold or training failed
    /// for lack of a class.
    pub score: Option<f64>,
    pub scores: Option<ScoreSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelIndexEntry {
    pub config_digest: String,
    pub config: GridPointConfig,
    pub scorer: Scorer,
    pub n_features: usize,
    /// Mean over folds with a defined score.
    pub mean_score: Option<f64>,
    pub per_fold_scores: Vec<Option<f64>>,
    pub folds: Vec<FoldResult>,
    pub undefined_folds: usize,
    pub model_bundle_path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: ModelIndexEntry,
    /// Sorted by digest.
    pub index: Vec<ModelIndexEntry>,
}

/// What one fold actually trained and validated on.
#[derive(Clone, Debug)]
pub struct FoldAudit<'a> {
    pub config_digest: &'a str,
    pub fold_index: usize,
    pub train_ids: &'a [String],
    pub train_partitions: &'a [String],
    pub validation_ids: &'a [String],
    pub validation_partitions: &'a [String],
}

pub fn grid_search(
    ds: &Dataset,
    grid: &SearchGrid,
    plan: &PartitionFoldPlan,
    seed: u64,
) -> Result<GridSearchOutcome> {
    grid_search_observed(ds, grid, plan, seed, &|_| {})
}

/// [`grid_search`] that reports every fold's train/validation rows to
/// `observer` before training.
pub fn grid_search_observed(
    ds: &Dataset,
    grid: &SearchGrid,
    plan: &PartitionFoldPlan,
    seed: u64,
    observer: &(dyn Fn(&FoldAudit<'_>) + Sync),
) -> Result<GridSearchOutcome> {
    grid.validate()?;
    if plan.is_empty() {
        return Err(Error::Argument("fold plan is empty".into()));
    }
    let mut matrices: BTreeMap<String, FeatureMatrix> = BTreeMap::new();
    for g in &grid.scale_grids {
        if let std::collections::btree_map::Entry::Vacant(slot) = matrices.entry(g.to_string()) {
            slot.insert(featurize_dataset(ds, g)?);
        }
    }

    let points = grid.points(seed);
    let mut index = points
        .par_iter()
        .map(|cfg| evaluate_point(&matrices[&cfg.scale_grid.to_string()], cfg, grid, plan, observer))
        .collect::<Result<Vec<_>>>()?;
    index.sort_by(|a, b| a.config_digest.cmp(&b.config_digest));
    if let Some(w) = index.windows(2).find(|w| w[0].config_digest == w[1].config_digest) {
        return Err(Error::Argument(format!("grid repeats configuration {}", w[0].config_digest)));
    }

    let best = index
        .iter()
        .min_by(|a, b| preference(a, b))
        .cloned()
        .expect("grid has at least one point");
    Ok(GridSearchOutcome { best, index })
}

/// Higher mean first, then fewer features, then smaller digest. Undefined
/// means sort last.
fn preference(a: &ModelIndexEntry, b: &ModelIndexEntry) -> std::cmp::Ordering {
    let (sa, sb) = (
        a.mean_score.unwrap_or(f64::NEG_INFINITY),
        b.mean_score.unwrap_or(f64::NEG_INFINITY),
    );
    sb.total_cmp(&sa)
        .then(a.n_features.cmp(&b.n_features))
        .then_with(|| a.config_digest.cmp(&b.config_digest))
}

fn evaluate_point(
    full: &FeatureMatrix,
    cfg: &GridPointConfig,
    grid: &SearchGrid,
    plan: &PartitionFoldPlan,
    observer: &(dyn Fn(&FoldAudit<'_>) + Sync),
) -> Result<ModelIndexEntry> {
    let digest = config_digest(cfg)?;
    let fm = match &cfg.features {
        Some(keep) => select_columns(full, keep)?,
        None => full.clone(),
    };
    let mut folds = Vec::with_capacity(plan.len());
    for (fold_index, fold) in plan.folds().iter().enumerate() {
        let train = fm.select_rows(&fm.rows_in_partitions(&fold.train));
        let valid = fm.select_rows(&fm.rows_in_partitions(&fold.validation));
        observer(&FoldAudit {
            config_digest: &digest,
            fold_index,
            train_ids: train.instance_ids(),
            train_partitions: train.partition_ids(),
            validation_ids: valid.instance_ids(),
            validation_partitions: valid.partition_ids(),
        });
        let model = match train_forest(&train, &cfg.forest) {
            Ok(m) => m,
            Err(Error::Training(_)) => {
                folds.push(FoldResult {
                    validation: fold.validation.clone(),
                    score: None,
                    scores: None,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let pred = model.predict_labels(&valid)?;
        let table = contingency(valid.labels(), &pred)?;
        let scores = ScoreSet::from_table(table, &grid.alphas)?;
        folds.push(FoldResult {
            validation: fold.validation.clone(),
            score: grid.scorer.score(&scores),
            scores: Some(scores),
        });
    }
    let per_fold_scores: Vec<Option<f64>> = folds.iter().map(|f| f.score).collect();
    let defined: Vec<f64> = per_fold_scores.iter().flatten().copied().collect();
    let mean_score = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(ModelIndexEntry {
        config_digest: digest,
        config: cfg.clone(),
        scorer: grid.scorer,
        n_features: fm.n_features(),
        mean_score,
        undefined_folds: per_fold_scores.len() - defined.len(),
        per_fold_scores,
        folds,
        model_bundle_path: None,
    })
}

/// Trains `cfg` on every instance of `partitions`.
pub fn fit_config(ds: &Dataset, cfg: &GridPointConfig, partitions: &BTreeSet<String>) -> Result<ForestModel> {
    let full = featurize_dataset(ds, &cfg.scale_grid)?;
    let fm = match &cfg.features {
        Some(keep) => select_columns(&full, keep)?,
        None => full,
    };
    train_forest(&fm.select_rows(&fm.rows_in_partitions(partitions)), &cfg.forest)
}

/// Writes `index.jsonl`, `best.json` and one bundle per entry under
/// `models/<digest>.json`, each trained on every partition of the plan.
pub fn write_registry(
    dir: &Path,
    ds: &Dataset,
    plan: &PartitionFoldPlan,
    outcome: &GridSearchOutcome,
) -> Result<GridSearchOutcome> {
    let parts = plan.partitions();
    let entries = outcome
        .index
        .par_iter()
        .map(|entry| {
            let rel = format!("{MODELS_DIR}/{}.json", entry.config_digest);
            let path = dir.join(&rel);
            if !path.exists() {
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                fit_config(ds, &entry.config, &parts)?.save(&path)?;
            }
            Ok(ModelIndexEntry {
                model_bundle_path: Some(rel),
                ..entry.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut lines = String::new();
    for e in &entries {
        lines.push_str(&serde_json::to_string(e)?);
        lines.push('\n');
    }
    write_atomic(&dir.join(INDEX_FILE), lines.as_bytes())?;
    let best = entries
        .iter()
        .find(|e| e.config_digest == outcome.best.config_digest)
        .cloned()
        .expect("best entry is in the index");
    write_json(&dir.join(BEST_FILE), &best)?;
    Ok(GridSearchOutcome { best, index: entries })
}

pub fn read_index(path: &Path) -> Result<Vec<ModelIndexEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
