//! Class-weighted random forest with Gini feature importances.
//!
//! Each tree is grown greedily on the (optionally bootstrapped) training
//! rows. At every node a random subset of features is examined and the
//! split maximising the class-weighted Gini decrease is taken; thresholds
//! are midpoints between consecutive distinct values. The negative class
//! always has weight 1, the positive class `class_weight_positive`.

mod tree;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::BinaryLabel;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub use tree::{DecisionTree, Node};
use tree::TreeBuilder;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MaxFeatures {
    #[default]
    Sqrt,
    Log2,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    /// Number of candidate features per split out of `p`.
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (p as f64).log2().floor() as usize,
            MaxFeatures::All => p,
            MaxFeatures::Fixed(k) => k,
        };
        k.clamp(1, p.max(1))
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Log2 => f.write_str("log2"),
            MaxFeatures::All => f.write_str("all"),
            MaxFeatures::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            "all" => Ok(MaxFeatures::All),
            other => match other.parse::<usize>() {
                Ok(k) if k > 0 => Ok(MaxFeatures::Fixed(k)),
                _ => Err(Error::Argument(format!(
                    "max_features must be sqrt, log2, all or a positive integer, got {other:?}"
                ))),
            },
        }
    }
}

impl TryFrom<String> for MaxFeatures {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MaxFeatures> for String {
    fn from(m: MaxFeatures) -> String {
        m.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    /// Weight of a flaring sample; non-flaring samples weigh 1.
    pub class_weight_positive: f64,
    pub bootstrap_rows: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: Some(8),
            min_samples_leaf: 5,
            max_features: MaxFeatures::Sqrt,
            class_weight_positive: 1.0,
            bootstrap_rows: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Argument("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Argument("min_samples_leaf must be at least 1".into()));
        }
        if !(self.class_weight_positive.is_finite() && self.class_weight_positive > 0.0) {
            return Err(Error::Argument(format!(
                "class_weight_positive must be positive, got {}",
                self.class_weight_positive
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    /// Canonical feature ids, in column order.
    pub feature_ids: Vec<String>,
    pub trees: Vec<DecisionTree>,
    /// Normalized total Gini decrease per feature. All zeros when no tree
    /// made a split.
    pub importances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub label: BinaryLabel,
    pub score: f64,
}

/// `1 − p₊² − p₋²` over class-weighted proportions.
pub fn gini_impurity(w_pos: f64, w_neg: f64) -> Result<f64> {
    let total = w_pos + w_neg;
    if w_pos < 0.0 || w_neg < 0.0 || total <= 0.0 || !total.is_finite() {
        return Err(Error::Argument(format!(
            "gini impurity needs non-negative weights with positive total, got ({w_pos}, {w_neg})"
        )));
    }
    let (p, q) = (w_pos / total, w_neg / total);
    Ok(1.0 - p * p - q * q)
}

pub fn train_forest(fm: &FeatureMatrix, params: &ForestParams) -> Result<ForestModel> {
    params.validate()?;
    let n = fm.n_rows();
    if n < 2 {
        return Err(Error::Training(format!("need at least 2 rows, got {n}")));
    }
    let positive: Vec<bool> = fm.labels().iter().map(|l| l.is_flaring()).collect();
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::Training("training data contains a single class".into()));
    }
    let p = fm.n_features();
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|c| (0..n).map(|r| fm.value(r, c)).collect())
        .collect();
    if columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("feature matrix contains non-finite values".into()));
    }
    let n_candidates = params.max_features.resolve(p);

    let grown: Vec<(DecisionTree, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
            let mut samples: Vec<usize> = if params.bootstrap_rows {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder::new(&columns, &positive, params, n_candidates);
            builder.grow(&mut samples, 0, &mut rng);
            (DecisionTree { nodes: builder.nodes }, builder.importances)
        })
        .collect();

    // Summed in tree order, so the result does not depend on scheduling.
    let mut importances = vec![0.0; p];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, imp) in grown {
        importances.iter_mut().zip(&imp).for_each(|(a, b)| *a += b);
        trees.push(tree);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    }

    Ok(ForestModel {
        params: params.clone(),
        feature_ids: fm.feature_ids(),
        trees,
        importances,
    })
}

impl ForestModel {
    /// Mean positive-class leaf score over all trees.
    pub fn score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_ids.len() {
            return Err(Error::Argument(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.feature_ids.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("row contains non-finite values".into()));
        }
        let sum: f64 = self.trees.iter().map(|t| t.positive_score(row)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict(&self, row: &[f64]) -> Result<(BinaryLabel, f64)> {
        self.predict_with_threshold(row, 0.5)
    }

    /// Flaring iff `score >= threshold`.
    pub fn predict_with_threshold(&self, row: &[f64], threshold: f64) -> Result<(BinaryLabel, f64)> {
        let score = self.score(row)?;
        let label = if score >= threshold {
            BinaryLabel::Flaring
        } else {
            BinaryLabel::NonFlaring
        };
        Ok((label, score))
    }

    /// Row-wise predictions, in matrix order. Columns must match the
    /// model's feature ids exactly.
    pub fn predict_dataset(&self, fm: &FeatureMatrix) -> Result<Vec<Prediction>> {
        self.check_columns(fm)?;
        (0..fm.n_rows())
            .map(|r| {
                let (label, score) = self.predict(fm.row(r))?;
                Ok(Prediction {
                    instance_id: fm.instance_ids()[r].clone(),
                    label,
                    score,
                })
            })
            .collect()
    }

    /// Labels only, for scoring.
    pub fn predict_labels(&self, fm: &FeatureMatrix) -> Result<Vec<BinaryLabel>> {
        Ok(self.predict_dataset(fm)?.into_iter().map(|p| p.label).collect())
    }

    fn check_columns(&self, fm: &FeatureMatrix) -> Result<()> {
        let ids = fm.descriptors().iter().map(|d| d.canonical_id());
        if fm.n_features() != self.feature_ids.len() || !ids.zip(&self.feature_ids).all(|(a, b)| &a == b) {
            return Err(Error::Argument(
                "feature columns do not match the model's descriptors".into(),
            ));
        }
        Ok(())
    }

    /// `(feature id, importance)` sorted by importance descending, ties by id.
    pub fn ranked_importances(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .feature_ids
            .iter()
            .cloned()
            .zip(self.importances.iter().copied())
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string(self)?;
        json.push('\n');
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: ForestModel = serde_json::from_str(&text)?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let p = self.feature_ids.len();
        if self.trees.is_empty() || self.importances.len() != p {
            return Err(Error::Validation("malformed model bundle".into()));
        }
        for tree in &self.trees {
            let n = tree.nodes.len();
            for (i, node) in tree.nodes.iter().enumerate() {
                if let Node::Split { feature, left, right, .. } = node {
                    // Children always follow their parent, which rules out cycles.
                    if *feature >= p || *left <= i || *right <= i || *left >= n || *right >= n {
                        return Err(Error::Validation("model tree references out of range".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
