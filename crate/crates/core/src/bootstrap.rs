//! Bootstrap campaigns: repeated subsample/train/evaluate runs.
//!
//! Each run draws a subsample of the training matrix with a seed derived
//! from the master seed and run index, trains a forest, scores it on the
//! training subsample and the test set, and keeps the top-`k` features of
//! its importance ranking. Run results aggregate into error bars, summed
//! selection counts, a final feature set and per-parameter participation.
//! One campaign runs per positive-class weight.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::{featurize_dataset, select_columns, FeatureMatrix, ScaleGrid};
use crate::forest::{train_forest, ForestParams};
use crate::io_util::{write_atomic, write_csv, write_json};
use crate::metrics::{contingency, format_score, ScoreSet, SkillReport};
use crate::ranking::{
    log_filter_k, parameters_of, participation_ratio, select_final, top_k, FeatureRanking,
    MembershipVector, SfsVector,
};

pub const CONFIG_FILE: &str = "config.json";
pub const RUNS_FILE: &str = "runs.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ERRORBARS_FILE: &str = "errorbars.csv";
pub const PARTICIPATION_FILE: &str = "participation.csv";

/// How many top-ranked features to keep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KRule {
    /// `max(1, ⌊log₂ n_features⌋)`
    #[default]
    Log2,
    Fixed(usize),
}

impl KRule {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            KRule::Log2 => log_filter_k(n_features),
            KRule::Fixed(k) => k,
        }
    }
}

impl fmt::Display for KRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KRule::Log2 => f.write_str("log2"),
            KRule::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for KRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log2" => Ok(KRule::Log2),
            other => match other.parse::<usize>() {
                Ok(k) if k > 0 => Ok(KRule::Fixed(k)),
                _ => Err(Error::Argument(format!("k rule must be log2 or a positive integer, got {other:?}"))),
            },
        }
    }
}

impl TryFrom<String> for KRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KRule> for String {
    fn from(k: KRule) -> String {
        k.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub n_runs: usize,
    pub subsample_fraction: f64,
    pub sample_with_replacement: bool,
    /// Forest settings; `seed` and `class_weight_positive` are overridden
    /// per run and per campaign.
    pub forest: ForestParams,
    /// `None` uses [`ScaleGrid::default_for`] on the training series length.
    pub scale_grid: Option<ScaleGrid>,
    /// One campaign per value.
    pub class_weights: Vec<f64>,
    pub per_run_k: KRule,
    pub final_k: KRule,
    pub alphas: Vec<f64>,
    pub master_seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_runs: 10,
            subsample_fraction: 1.0,
            sample_with_replacement: true,
            forest: ForestParams::default(),
            scale_grid: None,
            class_weights: vec![1.0],
            per_run_k: KRule::Log2,
            final_k: KRule::Log2,
            alphas: vec![1.0],
            master_seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Argument("n_runs must be at least 1".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::Argument(format!(
                "subsample fraction {} outside (0, 1]",
                self.subsample_fraction
            )));
        }
        if self.class_weights.is_empty() {
            return Err(Error::Argument("no class weights given".into()));
        }
        for &cw in &self.class_weights {
            ForestParams { class_weight_positive: cw, ..self.forest.clone() }.validate()?;
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a < 2.0) {
                return Err(Error::Argument(format!("alpha {a} outside (0, 2)")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRunResult {
    pub class_weight: f64,
    pub run_index: usize,
    /// Seed of the attempt that produced this result.
    pub seed: u64,
    pub attempts: u32,
    /// Both attempts drew a single-class subsample.
    pub failed: bool,
    pub n_subsample: usize,
    pub train: Option<ScoreSet>,
    pub test: Option<ScoreSet>,
    pub selected: Option<MembershipVector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub split: String,
    /// `None` when no run had a defined value.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
    /// Successful runs whose value was undefined.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub class_weight: f64,
    pub n_runs: usize,
    pub n_failed: usize,
    pub n_features: usize,
    pub metrics: Vec<MetricSummary>,
    pub sfs: SfsVector,
    pub final_k: usize,
    pub final_selection: BTreeSet<String>,
    /// Over successful runs.
    pub participation: BTreeMap<String, f64>,
}

impl BootstrapSummary {
    pub fn metric(&self, metric: &str, split: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric && m.split == split)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub class_weight: f64,
    pub runs: Vec<BootstrapRunResult>,
    pub summary: BootstrapSummary,
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-run seed.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

/// Row indices of one subsample of `n_rows`, sorted ascending.
pub fn draw_subsample(n_rows: usize, fraction: f64, with_replacement: bool, seed: u64) -> Vec<usize> {
    if n_rows == 0 {
        return Vec::new();
    }
    let m = ((fraction * n_rows as f64).round() as usize).clamp(1, n_rows);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = if with_replacement {
        (0..m).map(|_| rng.random_range(0..n_rows)).collect()
    } else {
        index::sample(&mut rng, n_rows, m).into_vec()
    };
    rows.sort_unstable();
    rows
}

/// Mean and sample standard deviation (`n − 1`; 0 for a single value).
/// Values are sorted first so the result does not depend on input order.
pub fn summarize_scores(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Argument("no scores to summarize".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return Ok((mean, 0.0));
    }
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    Ok((mean, (dev.iter().sum::<f64>() / (n - 1.0)).sqrt()))
}

fn has_both_classes(fm: &FeatureMatrix) -> bool {
    let pos = fm.labels().iter().filter(|l| l.is_flaring()).count();
    pos > 0 && pos < fm.n_rows()
}

fn score_on(model: &crate::forest::ForestModel, fm: &FeatureMatrix, alphas: &[f64]) -> Result<ScoreSet> {
    let pred = model.predict_labels(fm)?;
    ScoreSet::from_table(contingency(fm.labels(), &pred)?, alphas)
}

fn one_run(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    cfg: &BootstrapConfig,
    class_weight: f64,
    run_index: usize,
) -> Result<BootstrapRunResult> {
    let first = derive_seed(cfg.master_seed, run_index as u64);
    let mut attempt = (first, 1u32);
    let mut sample = train.select_rows(&draw_subsample(
        train.n_rows(),
        cfg.subsample_fraction,
        cfg.sample_with_replacement,
        first,
    ));
    if !has_both_classes(&sample) {
        let retry = derive_seed(first, 1);
        attempt = (retry, 2);
        sample = train.select_rows(&draw_subsample(
            train.n_rows(),
            cfg.subsample_fraction,
            cfg.sample_with_replacement,
            retry,
        ));
    }
    let (seed, attempts) = attempt;
    let mut result = BootstrapRunResult {
        class_weight,
        run_index,
        seed,
        attempts,
        failed: true,
        n_subsample: sample.n_rows(),
        train: None,
        test: None,
        selected: None,
    };
    if !has_both_classes(&sample) {
        return Ok(result);
    }
    let params = ForestParams {
        seed,
        class_weight_positive: class_weight,
        ..cfg.forest.clone()
    };
    let model = train_forest(&sample, &params)?;
    let ranking = FeatureRanking::from_model(&model)?;
    let k = cfg.per_run_k.resolve(train.n_features());
    result.failed = false;
    result.train = Some(score_on(&model, &sample, &cfg.alphas)?);
    result.test = Some(score_on(&model, test, &cfg.alphas)?);
    result.selected = Some(top_k(&ranking, k)?.tagged(format!("cw{class_weight}-run{run_index}")));
    Ok(result)
}

/// Pure function of the run results, so it can be recomputed from
/// `runs.jsonl`.
pub fn summarize_campaign(
    runs: &[BootstrapRunResult],
    class_weight: f64,
    n_features: usize,
    final_k: KRule,
) -> Result<BootstrapSummary> {
    let ok: Vec<&BootstrapRunResult> = runs.iter().filter(|r| !r.failed).collect();
    if ok.is_empty() {
        return Err(Error::Training(format!(
            "all {} bootstrap runs drew single-class subsamples",
            runs.len()
        )));
    }
    let mut metrics = Vec::new();
    for (split, pick) in [
        ("train", (|r: &BootstrapRunResult| r.train.clone()) as fn(&BootstrapRunResult) -> Option<ScoreSet>),
        ("test", |r: &BootstrapRunResult| r.test.clone()),
    ] {
        let sets: Vec<ScoreSet> = ok.iter().filter_map(|r| pick(r)).collect();
        let names: Vec<String> = sets[0].named().into_iter().map(|(n, _)| n).collect();
        for (i, name) in names.iter().enumerate() {
            let values: Vec<f64> = sets.iter().filter_map(|s| s.named()[i].1).collect();
            let (mean, std) = match summarize_scores(&values) {
                Ok((m, s)) => (Some(m), Some(s)),
                Err(_) => (None, None),
            };
            metrics.push(MetricSummary {
                metric: name.clone(),
                split: split.to_string(),
                mean,
                std,
                n: values.len(),
                excluded: sets.len() - values.len(),
            });
        }
    }
    let mut sfs = SfsVector::default();
    let mut history = Vec::with_capacity(ok.len());
    for r in &ok {
        let members = r.selected.as_ref().expect("successful runs carry a selection");
        sfs.add(members);
        history.push(parameters_of(&members.members));
    }
    let k = final_k.resolve(n_features);
    Ok(BootstrapSummary {
        class_weight,
        n_runs: runs.len(),
        n_failed: runs.len() - ok.len(),
        n_features,
        metrics,
        final_selection: select_final(&sfs, k)?,
        sfs,
        final_k: k,
        participation: participation_ratio(&history, ok.len())?,
    })
}

/// One campaign per class weight, on pre-featurized matrices.
pub fn run_bootstrap_matrices(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    cfg: &BootstrapConfig,
) -> Result<Vec<Campaign>> {
    cfg.validate()?;
    if train.feature_ids() != test.feature_ids() {
        return Err(Error::Argument("train and test feature columns differ".into()));
    }
    cfg.class_weights
        .iter()
        .map(|&cw| {
            let runs = (0..cfg.n_runs)
                .into_par_iter()
                .map(|r| one_run(train, test, cfg, cw, r))
                .collect::<Result<Vec<_>>>()?;
            let summary = summarize_campaign(&runs, cw, train.n_features(), cfg.final_k)?;
            Ok(Campaign {
                class_weight: cw,
                runs,
                summary,
            })
        })
        .collect()
}

pub fn resolve_grid(cfg: &BootstrapConfig, ds: &Dataset) -> Result<ScaleGrid> {
    match &cfg.scale_grid {
        Some(g) => Ok(g.clone()),
        None => {
            let t = ds
                .uniform_timesteps()
                .ok_or_else(|| Error::Validation("series lengths differ across instances".into()))?;
            ScaleGrid::default_for(t)
        }
    }
}

pub fn run_bootstrap(train: &Dataset, test: &Dataset, cfg: &BootstrapConfig) -> Result<Vec<Campaign>> {
    let grid = resolve_grid(cfg, train)?;
    let train_fm = featurize_dataset(train, &grid)?;
    let test_fm = featurize_dataset(test, &grid)?;
    run_bootstrap_matrices(&train_fm, &test_fm, cfg)
}

/// Trains one forest on all of `train` restricted to `selection` and
/// scores it on `test`.
pub fn ex_ante_evaluate_matrices(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    selection: &BTreeSet<String>,
    params: &ForestParams,
    alphas: &[f64],
) -> Result<SkillReport> {
    if selection.is_empty() {
        return Err(Error::Argument("empty feature selection".into()));
    }
    let train = select_columns(train, selection)?;
    let test = select_columns(test, selection)?;
    let model = train_forest(&train, params)?;
    let pred = model.predict_labels(&test)?;
    SkillReport::from_table(contingency(test.labels(), &pred)?, alphas)
}

pub fn ex_ante_evaluate(
    train: &Dataset,
    test: &Dataset,
    grid: &ScaleGrid,
    selection: &BTreeSet<String>,
    params: &ForestParams,
    alphas: &[f64],
) -> Result<SkillReport> {
    if selection.is_empty() {
        return Err(Error::Argument("empty feature selection".into()));
    }
    let train_fm = featurize_dataset(train, grid)?;
    let test_fm = featurize_dataset(test, grid)?;
    ex_ante_evaluate_matrices(&train_fm, &test_fm, selection, params, alphas)
}

/// Participation over every successful run in `runs`.
pub fn pooled_participation(runs: &[BootstrapRunResult]) -> Result<BTreeMap<String, f64>> {
    let history: Vec<BTreeSet<String>> = runs
        .iter()
        .filter_map(|r| r.selected.as_ref())
        .map(|m| parameters_of(&m.members))
        .collect();
    participation_ratio(&history, history.len().max(1))
}

/// `cw, metric, split, mean, std, n, excluded, failed_runs`; undefined
/// values are written as `undefined`.
pub fn write_errorbars(path: &Path, summaries: &[BootstrapSummary]) -> Result<()> {
    write_csv(
        path,
        &["cw", "metric", "split", "mean", "std", "n", "excluded", "failed_runs"],
        summaries.iter().flat_map(|s| {
            s.metrics.iter().map(move |m| {
                [
                    s.class_weight.to_string(),
                    m.metric.clone(),
                    m.split.clone(),
                    format_score(m.mean),
                    format_score(m.std),
                    m.n.to_string(),
                    m.excluded.to_string(),
                    s.n_failed.to_string(),
                ]
            })
        }),
    )
}

/// `cw, parameter, ratio` with one block per class weight.
pub fn write_participation(path: &Path, summaries: &[BootstrapSummary]) -> Result<()> {
    write_csv(
        path,
        &["cw", "parameter", "ratio"],
        summaries.iter().flat_map(|s| {
            s.participation
                .iter()
                .map(move |(p, r)| [s.class_weight.to_string(), p.clone(), r.to_string()])
        }),
    )
}

/// One row per run and split: `cw, run, seed, split, failed`, then every
/// score column.
pub fn write_skill_table(path: &Path, runs: &[BootstrapRunResult]) -> Result<()> {
    let score_names: Vec<String> = runs
        .iter()
        .find_map(|r| r.test.as_ref())
        .map(|s| s.named().into_iter().map(|(n, _)| n).collect())
        .unwrap_or_default();
    let mut header = vec!["cw", "run", "seed", "split", "failed"];
    header.extend(score_names.iter().map(String::as_str));
    let mut rows = Vec::new();
    for r in runs {
        for (split, scores) in [("train", &r.train), ("test", &r.test)] {
            let mut row = vec![
                r.class_weight.to_string(),
                r.run_index.to_string(),
                r.seed.to_string(),
                split.to_string(),
                r.failed.to_string(),
            ];
            match scores {
                Some(s) => row.extend(s.named().into_iter().map(|(_, v)| format_score(v))),
                None => row.extend(score_names.iter().map(|_| format_score(None))),
            }
            rows.push(row);
        }
    }
    write_csv(path, &header, rows)
}

pub fn write_campaigns(dir: &Path, cfg: &BootstrapConfig, campaigns: &[Campaign]) -> Result<()> {
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    let runs: Vec<BootstrapRunResult> = campaigns.iter().flat_map(|c| c.runs.iter().cloned()).collect();
    let mut lines = String::new();
    for r in &runs {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    write_atomic(&dir.join(RUNS_FILE), lines.as_bytes())?;
    let summaries: Vec<BootstrapSummary> = campaigns.iter().map(|c| c.summary.clone()).collect();
    write_json(&dir.join(SUMMARY_FILE), &summaries)?;
    write_errorbars(&dir.join(ERRORBARS_FILE), &summaries)?;
    write_participation(&dir.join(PARTICIPATION_FILE), &summaries)
}

pub fn read_runs(path: &Path) -> Result<Vec<BootstrapRunResult>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
