//! Multi-scale sliding-window interval features.
//!
//! For every parameter and every window scale `(w, s)` the series is cut
//! into intervals `[i*s, i*s + w)`. Each interval contributes its mean,
//! sample standard deviation and least-squares slope; the per-interval
//! statistics are then pooled across intervals (max, min, mean) giving nine
//! more values. All parameters are fused into one flat vector.

mod io;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BinaryLabel, Dataset, TimeSeriesInstance};
use crate::error::{Error, Result};

pub use io::{read_feature_matrix, write_feature_matrix, DESCRIPTORS_FILE, FEATURES_FILE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct WindowConfig {
    window: usize,
    step: usize,
}

#[derive(Deserialize)]
struct RawWindow {
    window: usize,
    step: usize,
}

impl TryFrom<RawWindow> for WindowConfig {
    type Error = Error;

    fn try_from(r: RawWindow) -> Result<Self> {
        WindowConfig::new(r.window, r.step)
    }
}

impl WindowConfig {
    /// Windows shorter than two timesteps have no sample deviation or slope.
    pub fn new(window: usize, step: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::Argument(format!("window size {window} < 2")));
        }
        if step < 1 {
            return Err(Error::Argument("step size must be at least 1".into()));
        }
        Ok(Self { window, step })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn interval_count(&self, timesteps: usize) -> Result<usize> {
        if self.window > timesteps {
            return Err(Error::Argument(format!(
                "window {} longer than series length {timesteps}",
                self.window
            )));
        }
        Ok((timesteps - self.window) / self.step + 1)
    }
}

impl fmt::Display for WindowConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.window, self.step)
    }
}

impl FromStr for WindowConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (w, st) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("window {s:?} is not w:s")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::Argument(format!("window {s:?} is not w:s")))
        };
        WindowConfig::new(parse(w)?, parse(st)?)
    }
}

/// Ordered, duplicate-free list of window scales.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<WindowConfig>", into = "Vec<WindowConfig>")]
pub struct ScaleGrid(Vec<WindowConfig>);

impl ScaleGrid {
    pub fn new(scales: Vec<WindowConfig>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::Argument("scale grid is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &scales {
            if !seen.insert(*s) {
                return Err(Error::Argument(format!("duplicate scale {s}")));
            }
        }
        Ok(Self(scales))
    }

    /// Windows of T/5, T/3 and T/2 (floored, at least 2) with half-window steps.
    pub fn default_for(timesteps: usize) -> Result<Self> {
        let mut scales = Vec::new();
        for div in [5, 3, 2] {
            let w = (timesteps / div).max(2);
            let cfg = WindowConfig::new(w, (w / 2).max(1))?;
            if w <= timesteps && !scales.contains(&cfg) {
                scales.push(cfg);
            }
        }
        Self::new(scales)
    }

    pub fn scales(&self) -> &[WindowConfig] {
        &self.0
    }

    pub fn check_for(&self, timesteps: usize) -> Result<()> {
        self.0.iter().try_for_each(|s| s.interval_count(timesteps).map(drop))
    }
}

impl TryFrom<Vec<WindowConfig>> for ScaleGrid {
    type Error = Error;

    fn try_from(v: Vec<WindowConfig>) -> Result<Self> {
        ScaleGrid::new(v)
    }
}

impl From<ScaleGrid> for Vec<WindowConfig> {
    fn from(g: ScaleGrid) -> Self {
        g.0
    }
}

impl fmt::Display for ScaleGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for ScaleGrid {
    type Err = Error;

    /// Parses `"w:s,w:s,..."`.
    fn from_str(s: &str) -> Result<Self> {
        let scales = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<WindowConfig>>>()?;
        ScaleGrid::new(scales)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    Std,
    Slope,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Mean, Statistic::Std, Statistic::Slope];

    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Std => "std",
            Statistic::Slope => "slope",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
    Min,
    Mean,
}

impl PoolKind {
    pub const ALL: [PoolKind; 3] = [PoolKind::Max, PoolKind::Min, PoolKind::Mean];

    pub fn as_str(self) -> &'static str {
        match self {
            PoolKind::Max => "max",
            PoolKind::Min => "min",
            PoolKind::Mean => "mean",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Where a feature comes from inside one (parameter, scale) block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSlot {
    Interval(usize),
    Pooled(PoolKind),
}

impl fmt::Display for FeatureSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSlot::Interval(i) => write!(f, "int{i}"),
            FeatureSlot::Pooled(p) => write!(f, "pool{}", p.as_str()),
        }
    }
}

/// Provenance of one scalar feature.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub parameter: String,
    pub scale: WindowConfig,
    pub slot: FeatureSlot,
    pub statistic: Statistic,
}

impl FeatureDescriptor {
    /// `param|w{w}s{s}|int{i}|stat` or `param|w{w}s{s}|pool{p}|stat`.
    pub fn canonical_id(&self) -> String {
        format!(
            "{}|w{}s{}|{}|{}",
            self.parameter,
            self.scale.window,
            self.scale.step,
            self.slot,
            self.statistic.as_str()
        )
    }

    pub fn parse(id: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("not a feature id: {id:?}"));
        let parts: Vec<&str> = id.split('|').collect();
        let [parameter, scale, slot, stat] = parts[..] else {
            return Err(bad());
        };
        let (w, s) = scale
            .strip_prefix('w')
            .and_then(|r| r.split_once('s'))
            .ok_or_else(bad)?;
        let scale = WindowConfig::new(w.parse().map_err(|_| bad())?, s.parse().map_err(|_| bad())?)
            .map_err(|_| bad())?;
        let slot = if let Some(i) = slot.strip_prefix("int") {
            FeatureSlot::Interval(i.parse().map_err(|_| bad())?)
        } else {
            match slot {
                "poolmax" => FeatureSlot::Pooled(PoolKind::Max),
                "poolmin" => FeatureSlot::Pooled(PoolKind::Min),
                "poolmean" => FeatureSlot::Pooled(PoolKind::Mean),
                _ => return Err(bad()),
            }
        };
        let statistic = match stat {
            "mean" => Statistic::Mean,
            "std" => Statistic::Std,
            "slope" => Statistic::Slope,
            _ => return Err(bad()),
        };
        if parameter.is_empty() {
            return Err(bad());
        }
        Ok(Self {
            parameter: parameter.to_string(),
            scale,
            slot,
            statistic,
        })
    }

    /// The parameter name of a canonical id, without a full parse.
    pub fn parameter_of(id: &str) -> &str {
        id.split('|').next().unwrap_or(id)
    }
}

/// Half-open index ranges `[i*s, i*s + w)` for `i = 0..=(T - w) / s`.
pub fn generate_intervals(timesteps: usize, cfg: WindowConfig) -> Result<Vec<(usize, usize)>> {
    let n = cfg.interval_count(timesteps)?;
    Ok((0..n).map(|i| (i * cfg.step, i * cfg.step + cfg.window)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalStats {
    pub mean: f64,
    /// Sample standard deviation (divisor n - 1).
    pub std: f64,
    /// Least-squares slope against the timestep index.
    pub slope: f64,
}

impl IntervalStats {
    pub fn get(&self, stat: Statistic) -> f64 {
        match stat {
            Statistic::Mean => self.mean,
            Statistic::Std => self.std,
            Statistic::Slope => self.slope,
        }
    }
}

pub fn interval_stats(series: &[f64], interval: (usize, usize)) -> Result<IntervalStats> {
    let (start, end) = interval;
    if end > series.len() || start >= end {
        return Err(Error::Argument(format!(
            "interval ({start}, {end}) outside series of length {}",
            series.len()
        )));
    }
    if end - start < 2 {
        return Err(Error::Argument("interval shorter than 2".into()));
    }
    let xs = &series[start..end];
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    let ss: f64 = xs.iter().map(|v| (v - mean) * (v - mean)).sum();
    let t_mean = (n - 1.0) / 2.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, v) in xs.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxx += dt * dt;
        sxy += dt * (v - mean);
    }
    Ok(IntervalStats {
        mean,
        std: (ss / (n - 1.0)).sqrt(),
        slope: sxy / sxx,
    })
}

/// Neumaier summation; keeps the mean of a shifted series within an ulp or
/// two of the shifted mean.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Max, min and mean of each statistic across intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PooledStats([[f64; 3]; 3]);

impl PooledStats {
    pub fn get(&self, stat: Statistic, pool: PoolKind) -> f64 {
        self.0[stat.index()][pool.index()]
    }
}

pub fn pool_stats(per_interval: &[IntervalStats]) -> Result<PooledStats> {
    if per_interval.is_empty() {
        return Err(Error::Argument("cannot pool zero intervals".into()));
    }
    let mut out = [[0.0; 3]; 3];
    for stat in Statistic::ALL {
        let vals = per_interval.iter().map(|s| s.get(stat));
        let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.clone().fold(f64::INFINITY, f64::min);
        let mean = vals.sum::<f64>() / per_interval.len() as f64;
        out[stat.index()] = [max, min, mean];
    }
    Ok(PooledStats(out))
}

fn check_parameter_names(names: &[String]) -> Result<()> {
    match names.iter().find(|n| n.is_empty() || n.contains('|')) {
        Some(n) => Err(Error::Argument(format!("parameter name {n:?} cannot be used in feature ids"))),
        None => Ok(()),
    }
}

/// Descriptors in vector order for `P` parameters of length `T`.
pub fn feature_layout(parameters: &[String], timesteps: usize, grid: &ScaleGrid) -> Result<Vec<FeatureDescriptor>> {
    check_parameter_names(parameters)?;
    let mut out = Vec::new();
    for parameter in parameters {
        for &scale in grid.scales() {
            let n = scale.interval_count(timesteps)?;
            for i in 0..n {
                for statistic in Statistic::ALL {
                    out.push(FeatureDescriptor {
                        parameter: parameter.clone(),
                        scale,
                        slot: FeatureSlot::Interval(i),
                        statistic,
                    });
                }
            }
            for statistic in Statistic::ALL {
                for pool in PoolKind::ALL {
                    out.push(FeatureDescriptor {
                        parameter: parameter.clone(),
                        scale,
                        slot: FeatureSlot::Pooled(pool),
                        statistic,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn instance_values(inst: &TimeSeriesInstance, grid: &ScaleGrid) -> Result<Vec<f64>> {
    if !inst.is_finite() {
        return Err(Error::Validation(format!(
            "{}: non-finite values; impute before featurizing",
            inst.instance_id
        )));
    }
    let t = inst.n_timesteps();
    let mut out = Vec::new();
    for series in &inst.values {
        for &scale in grid.scales() {
            let stats = generate_intervals(t, scale)?
                .into_iter()
                .map(|iv| interval_stats(series, iv))
                .collect::<Result<Vec<_>>>()?;
            for s in &stats {
                out.extend([s.mean, s.std, s.slope]);
            }
            let pooled = pool_stats(&stats)?;
            for stat in Statistic::ALL {
                for pool in PoolKind::ALL {
                    out.push(pooled.get(stat, pool));
                }
            }
        }
    }
    Ok(out)
}

/// Early-fused feature vector of one imputed instance, with its descriptors.
pub fn featurize_instance(
    inst: &TimeSeriesInstance,
    grid: &ScaleGrid,
) -> Result<(Vec<f64>, Vec<FeatureDescriptor>)> {
    let layout = feature_layout(&inst.parameter_names, inst.n_timesteps(), grid)?;
    let values = instance_values(inst, grid)?;
    debug_assert_eq!(values.len(), layout.len());
    Ok((values, layout))
}

/// Recomputes a single feature straight from its descriptor.
pub fn feature_value(inst: &TimeSeriesInstance, desc: &FeatureDescriptor) -> Result<f64> {
    let series = inst
        .series(&desc.parameter)
        .ok_or_else(|| Error::Argument(format!("no parameter {}", desc.parameter)))?;
    let intervals = generate_intervals(series.len(), desc.scale)?;
    match desc.slot {
        FeatureSlot::Interval(i) => {
            let iv = *intervals
                .get(i)
                .ok_or_else(|| Error::Argument(format!("no interval {i}")))?;
            Ok(interval_stats(series, iv)?.get(desc.statistic))
        }
        FeatureSlot::Pooled(pool) => {
            let stats = intervals
                .into_iter()
                .map(|iv| interval_stats(series, iv))
                .collect::<Result<Vec<_>>>()?;
            Ok(pool_stats(&stats)?.get(desc.statistic, pool))
        }
    }
}

/// Instances × features table, rows in dataset order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    descriptors: Vec<FeatureDescriptor>,
    values: Vec<f64>,
    instance_ids: Vec<String>,
    partition_ids: Vec<String>,
    labels: Vec<BinaryLabel>,
}

impl FeatureMatrix {
    /// Row-major `values`; checks shapes, finiteness and unique column ids.
    pub fn new(
        descriptors: Vec<FeatureDescriptor>,
        values: Vec<f64>,
        instance_ids: Vec<String>,
        partition_ids: Vec<String>,
        labels: Vec<BinaryLabel>,
    ) -> Result<Self> {
        let n = instance_ids.len();
        if partition_ids.len() != n || labels.len() != n || values.len() != n * descriptors.len() {
            return Err(Error::Validation("feature matrix shape mismatch".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature value at row {}",
                pos / descriptors.len().max(1)
            )));
        }
        let mut ids = BTreeSet::new();
        for d in &descriptors {
            if !ids.insert(d.canonical_id()) {
                return Err(Error::Validation(format!("duplicate feature {}", d.canonical_id())));
            }
        }
        Ok(Self {
            descriptors,
            values,
            instance_ids,
            partition_ids,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.descriptors.len()
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn feature_ids(&self) -> Vec<String> {
        self.descriptors.iter().map(FeatureDescriptor::canonical_id).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.descriptors.len();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.descriptors.len() + col]
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn partition_ids(&self) -> &[String] {
        &self.partition_ids
    }

    pub fn labels(&self) -> &[BinaryLabel] {
        &self.labels
    }

    /// Rows at `indices`, in that order; repeats are allowed.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.n_features());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            descriptors: self.descriptors.clone(),
            values,
            instance_ids: indices.iter().map(|&i| self.instance_ids[i].clone()).collect(),
            partition_ids: indices.iter().map(|&i| self.partition_ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Rows whose partition id is in `parts`, in original order.
    pub fn rows_in_partitions(&self, parts: &BTreeSet<String>) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| parts.contains(&self.partition_ids[i]))
            .collect()
    }
}

pub fn featurize_dataset(ds: &Dataset, grid: &ScaleGrid) -> Result<FeatureMatrix> {
    let timesteps = match ds.uniform_timesteps() {
        Some(t) => t,
        None if ds.is_empty() => 0,
        None => return Err(Error::Validation("instances have different series lengths".into())),
    };
    let descriptors = if ds.is_empty() {
        Vec::new()
    } else {
        feature_layout(ds.parameter_names(), timesteps, grid)?
    };
    let rows = ds
        .instances()
        .par_iter()
        .map(|inst| instance_values(inst, grid))
        .collect::<Result<Vec<_>>>()?;
    let insts = ds.instances();
    FeatureMatrix::new(
        descriptors,
        rows.concat(),
        insts.iter().map(|i| i.instance_id.clone()).collect(),
        insts.iter().map(|i| i.partition_id.clone()).collect(),
        insts.iter().map(|i| i.label).collect(),
    )
}

/// Column subset in original column order.
pub fn select_columns(fm: &FeatureMatrix, keep: &BTreeSet<String>) -> Result<FeatureMatrix> {
    if keep.is_empty() {
        return Err(Error::Argument("empty feature selection".into()));
    }
    let index: HashMap<String, usize> = fm
        .descriptors
        .iter()
        .enumerate()
        .map(|(i, d)| (d.canonical_id(), i))
        .collect();
    if let Some(unknown) = keep.iter().find(|id| !index.contains_key(*id)) {
        return Err(Error::Argument(format!("unknown feature {unknown}")));
    }
    let cols: Vec<usize> = (0..fm.n_features())
        .filter(|&c| keep.contains(&fm.descriptors[c].canonical_id()))
        .collect();
    let mut values = Vec::with_capacity(fm.n_rows() * cols.len());
    for r in 0..fm.n_rows() {
        let row = fm.row(r);
        values.extend(cols.iter().map(|&c| row[c]));
    }
    Ok(FeatureMatrix {
        descriptors: cols.iter().map(|&c| fm.descriptors[c].clone()).collect(),
        values,
        instance_ids: fm.instance_ids.clone(),
        partition_ids: fm.partition_ids.clone(),
        labels: fm.labels.clone(),
    })
}

/// Columns named by `ids`, in that order.
pub fn project_columns(fm: &FeatureMatrix, ids: &[String]) -> Result<FeatureMatrix> {
    let index: HashMap<String, usize> = fm
        .descriptors
        .iter()
        .enumerate()
        .map(|(i, d)| (d.canonical_id(), i))
        .collect();
    let cols = ids
        .iter()
        .map(|id| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::Argument(format!("feature {id} is not in the matrix")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut values = Vec::with_capacity(fm.n_rows() * cols.len());
    for r in 0..fm.n_rows() {
        let row = fm.row(r);
        values.extend(cols.iter().map(|&c| row[c]));
    }
    FeatureMatrix::new(
        cols.iter().map(|&c| fm.descriptors[c].clone()).collect(),
        values,
        fm.instance_ids.clone(),
        fm.partition_ids.clone(),
        fm.labels.clone(),
    )
}

#[cfg(test)]
mod tests;
