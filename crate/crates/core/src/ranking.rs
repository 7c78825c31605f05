//! Feature rankings and their aggregation across experiments.
//!
//! Every experiment ranks features by importance and keeps its top `k` as a
//! membership vector. Summing membership vectors over experiments gives the
//! selected-feature-set counts; the final set is the `k` most frequent ids.
//! Ties always break by ascending canonical id.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureDescriptor, FeatureSlot, WindowConfig};
use crate::forest::ForestModel;
use crate::io_util::write_csv;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    entries: Vec<(String, f64)>,
}

impl FeatureRanking {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|(e, _)| e == id).map(|i| i + 1)
    }

    pub fn from_model(model: &ForestModel) -> Result<Self> {
        let pairs: Vec<(String, f64)> = model
            .feature_ids
            .iter()
            .cloned()
            .zip(model.importances.iter().copied())
            .collect();
        rank_features(&pairs)
    }
}

/// Descending importance, ties by ascending id.
pub fn rank_features(importances: &[(String, f64)]) -> Result<FeatureRanking> {
    if importances.is_empty() {
        return Err(Error::Argument("cannot rank an empty feature set".into()));
    }
    let mut seen = BTreeSet::new();
    for (id, v) in importances {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::Validation(format!("importance of {id} is {v}")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::Validation(format!("duplicate feature id {id}")));
        }
    }
    let mut entries = importances.to_vec();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(FeatureRanking { entries })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipVector {
    pub experiment_id: String,
    pub k: usize,
    pub members: BTreeSet<String>,
}

impl MembershipVector {
    pub fn tagged(mut self, experiment_id: impl Into<String>) -> Self {
        self.experiment_id = experiment_id.into();
        self
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members.contains(id)
    }
}

/// The first `min(k, |ranking|)` ids.
pub fn top_k(ranking: &FeatureRanking, k: usize) -> Result<MembershipVector> {
    if k < 1 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    Ok(MembershipVector {
        experiment_id: String::new(),
        k,
        members: ranking.ids().take(k).map(str::to_string).collect(),
    })
}

/// `k = max(1, ⌊log₂ n⌋)`.
pub fn log_filter_k(n_features: usize) -> usize {
    if n_features < 2 {
        1
    } else {
        n_features.ilog2() as usize
    }
}

/// Summed membership vectors. Ids that were never selected are absent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfsVector {
    pub counts: BTreeMap<String, u64>,
    pub n_experiments: usize,
}

impl SfsVector {
    pub fn count(&self, id: &str) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Adds one experiment's membership vector.
    pub fn add(&mut self, member: &MembershipVector) {
        for id in &member.members {
            match self.counts.get_mut(id) {
                Some(c) => *c += 1,
                None => {
                    self.counts.insert(id.clone(), 1);
                }
            }
        }
        self.n_experiments += 1;
    }

    /// Sum of two aggregates over disjoint experiment lists.
    pub fn merged(&self, other: &SfsVector) -> SfsVector {
        let mut out = self.clone();
        for (id, c) in &other.counts {
            *out.counts.entry(id.clone()).or_insert(0) += c;
        }
        out.n_experiments += other.n_experiments;
        out
    }

    /// `(id, count)` by count descending, ties by id.
    pub fn ranked(&self) -> Vec<(String, u64)> {
        let mut out: Vec<(String, u64)> = self.counts.iter().map(|(k, v)| (k.clone(), *v)).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

pub fn aggregate_sfs(members: &[MembershipVector]) -> Result<SfsVector> {
    if members.is_empty() {
        return Err(Error::Argument("no membership vectors to aggregate".into()));
    }
    let mut sfs = SfsVector::default();
    members.iter().for_each(|m| sfs.add(m));
    Ok(sfs)
}

/// The `k` most frequent ids, ties by ascending id.
pub fn select_final(sfs: &SfsVector, k: usize) -> Result<BTreeSet<String>> {
    if k < 1 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    Ok(sfs.ranked().into_iter().take(k).map(|(id, _)| id).collect())
}

/// One interval (or pooled) slot of one parameter at one scale.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotKey {
    pub parameter: String,
    pub scale: WindowConfig,
    pub slot: FeatureSlot,
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|w{}s{}|{}",
            self.parameter,
            self.scale.window(),
            self.scale.step(),
            self.slot
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountingVector {
    pub counts: BTreeMap<SlotKey, u64>,
}

/// Groups SFS counts by slot, summing over statistics.
pub fn counting_vector(sfs: &SfsVector, descriptors: &[FeatureDescriptor]) -> Result<CountingVector> {
    let lookup: HashMap<String, &FeatureDescriptor> =
        descriptors.iter().map(|d| (d.canonical_id(), d)).collect();
    let mut counts = BTreeMap::new();
    for (id, c) in &sfs.counts {
        let d = lookup
            .get(id)
            .ok_or_else(|| Error::Validation(format!("unknown feature id {id}")))?;
        let key = SlotKey {
            parameter: d.parameter.clone(),
            scale: d.scale,
            slot: d.slot,
        };
        *counts.entry(key).or_insert(0) += c;
    }
    Ok(CountingVector { counts })
}

/// Distinct parameter names of a set of feature ids.
pub fn parameters_of<'a>(ids: impl IntoIterator<Item = &'a String>) -> BTreeSet<String> {
    ids.into_iter()
        .map(|id| FeatureDescriptor::parameter_of(id).to_string())
        .collect()
}

/// Fraction of runs whose selection touched each parameter. Parameters that
/// never appear are absent from the map.
pub fn participation_ratio(history: &[BTreeSet<String>], n_runs: usize) -> Result<BTreeMap<String, f64>> {
    if n_runs < 1 || history.len() > n_runs {
        return Err(Error::Argument(format!(
            "{} selection records for {n_runs} runs",
            history.len()
        )));
    }
    let mut hits: BTreeMap<String, usize> = BTreeMap::new();
    for run in history {
        for p in run {
            *hits.entry(p.clone()).or_insert(0) += 1;
        }
    }
    Ok(hits
        .into_iter()
        .map(|(p, h)| (p, h as f64 / n_runs as f64))
        .collect())
}

pub fn write_ranking_csv(ranking: &FeatureRanking, path: &Path) -> Result<()> {
    write_csv(
        path,
        &["rank", "id", "importance"],
        ranking
            .entries()
            .iter()
            .enumerate()
            .map(|(i, (id, v))| [(i + 1).to_string(), id.clone(), v.to_string()]),
    )
}

pub fn write_sfs_csv(sfs: &SfsVector, path: &Path) -> Result<()> {
    write_csv(
        path,
        &["id", "count"],
        sfs.ranked().into_iter().map(|(id, c)| [id, c.to_string()]),
    )
}

pub fn write_counting_csv(cv: &CountingVector, path: &Path) -> Result<()> {
    write_csv(
        path,
        &["slot", "count"],
        cv.counts.iter().map(|(k, c)| [k.to_string(), c.to_string()]),
    )
}

pub fn write_participation_csv(ratios: &BTreeMap<String, f64>, path: &Path) -> Result<()> {
    write_csv(
        path,
        &["parameter", "ratio"],
        ratios.iter().map(|(p, r)| [p.clone(), r.to_string()]),
    )
}
