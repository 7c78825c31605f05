//! Multivariate time-series instances and datasets.
//!
//! An instance is one observation-window slice of an active region: `P`
//! parameter series sampled at the same `T` timesteps, a partition id and a
//! flare label. Datasets are immutable once built and always sorted by
//! instance id.

mod impute;
mod io;
mod label;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use impute::{impute_dataset, impute_missing, ImputeOutcome, ImputePolicy, ImputeReport};
pub use io::{load_dataset, write_dataset, IngestSchema};
pub use label::{binarize_label, BinaryLabel, FlareClass, FlareLabel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesInstance {
    pub instance_id: String,
    pub ar_number: Option<i64>,
    pub partition_id: String,
    pub start_ts: DateTime<Utc>,
    pub end_ts: DateTime<Utc>,
    /// One timestamp per column of `values`, ascending.
    pub timestamps: Vec<DateTime<Utc>>,
    pub parameter_names: Vec<String>,
    /// `P` rows of length `T`.
    pub values: Vec<Vec<f64>>,
    pub label: BinaryLabel,
    pub raw_label: FlareLabel,
}

impl TimeSeriesInstance {
    pub fn n_parameters(&self) -> usize {
        self.values.len()
    }

    pub fn n_timesteps(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn series(&self, parameter: &str) -> Option<&[f64]> {
        let idx = self.parameter_names.iter().position(|p| p == parameter)?;
        Some(&self.values[idx])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    /// Structural checks. Non-finite values are allowed here; imputation
    /// is a separate step.
    pub fn validate(&self) -> Result<()> {
        let id = &self.instance_id;
        if id.is_empty() {
            return Err(Error::Validation("empty instance id".into()));
        }
        if self.values.len() != self.parameter_names.len() {
            return Err(Error::Validation(format!(
                "{id}: {} value rows for {} parameters",
                self.values.len(),
                self.parameter_names.len()
            )));
        }
        let t = self.n_timesteps();
        if t < 2 {
            return Err(Error::Validation(format!("{id}: series length {t} < 2")));
        }
        if self.values.iter().any(|row| row.len() != t) {
            return Err(Error::Validation(format!("{id}: ragged parameter series")));
        }
        if self.timestamps.len() != t {
            return Err(Error::Validation(format!(
                "{id}: {} timestamps for {t} timesteps",
                self.timestamps.len()
            )));
        }
        if self.start_ts >= self.end_ts {
            return Err(Error::Validation(format!("{id}: start_ts must precede end_ts")));
        }
        let mut seen = BTreeSet::new();
        for name in &self.parameter_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!("{id}: duplicate parameter {name:?}")));
            }
        }
        if binarize_label(&self.raw_label) != self.label {
            return Err(Error::Validation(format!("{id}: label disagrees with raw label")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    parameter_names: Vec<String>,
    instances: Vec<TimeSeriesInstance>,
}

impl Dataset {
    /// Validates every instance against the shared parameter order and
    /// sorts by instance id.
    pub fn new(parameter_names: Vec<String>, mut instances: Vec<TimeSeriesInstance>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for inst in &instances {
            inst.validate()?;
            if inst.parameter_names != parameter_names {
                return Err(Error::Validation(format!(
                    "{}: parameter order differs from dataset",
                    inst.instance_id
                )));
            }
            if !ids.insert(inst.instance_id.as_str()) {
                return Err(Error::Validation(format!("duplicate instance id {}", inst.instance_id)));
            }
        }
        instances.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
        Ok(Self {
            parameter_names,
            instances,
        })
    }

    /// Builds a dataset taking the parameter order from the first instance.
    pub fn from_instances(instances: Vec<TimeSeriesInstance>) -> Result<Self> {
        let names = instances
            .first()
            .map(|i| i.parameter_names.clone())
            .unwrap_or_default();
        Self::new(names, instances)
    }

    pub fn parameter_names(&self) -> &[String] {
        &self.parameter_names
    }

    pub fn instances(&self) -> &[TimeSeriesInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn partitions(&self) -> BTreeSet<String> {
        self.instances.iter().map(|i| i.partition_id.clone()).collect()
    }

    /// The common series length, or `None` when empty or mixed.
    pub fn uniform_timesteps(&self) -> Option<usize> {
        let t = self.instances.first()?.n_timesteps();
        self.instances.iter().all(|i| i.n_timesteps() == t).then_some(t)
    }

    pub fn filter<F>(&self, keep: F) -> Dataset
    where
        F: Fn(&TimeSeriesInstance) -> bool,
    {
        Dataset {
            parameter_names: self.parameter_names.clone(),
            instances: self.instances.iter().filter(|i| keep(i)).cloned().collect(),
        }
    }

    pub fn into_instances(self) -> Vec<TimeSeriesInstance> {
        self.instances
    }
}

/// Splits by partition id. Instances whose partition is in neither set are
/// left out of both sides.
pub fn partition_split(
    ds: &Dataset,
    train_parts: &BTreeSet<String>,
    test_parts: &BTreeSet<String>,
) -> Result<(Dataset, Dataset)> {
    if train_parts.is_empty() || test_parts.is_empty() {
        return Err(Error::Argument("train and test partition sets must be nonempty".into()));
    }
    if let Some(p) = train_parts.intersection(test_parts).next() {
        return Err(Error::Argument(format!("partition {p} is on both sides")));
    }
    let known = ds.partitions();
    if let Some(p) = train_parts.union(test_parts).find(|p| !known.contains(*p)) {
        return Err(Error::Argument(format!("unknown partition {p}")));
    }
    Ok((
        ds.filter(|i| train_parts.contains(&i.partition_id)),
        ds.filter(|i| test_parts.contains(&i.partition_id)),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassBalance {
    pub flaring: usize,
    pub nonflaring: usize,
    /// nonflaring / flaring; `f64::INFINITY` when there are no flaring instances.
    pub imbalance_ratio: f64,
}

pub fn class_ratio(ds: &Dataset) -> Result<ClassBalance> {
    if ds.is_empty() {
        return Err(Error::Argument("class ratio of an empty dataset".into()));
    }
    let flaring = ds.instances.iter().filter(|i| i.label.is_flaring()).count();
    let nonflaring = ds.len() - flaring;
    let imbalance_ratio = if flaring == 0 {
        f64::INFINITY
    } else {
        nonflaring as f64 / flaring as f64
    };
    Ok(ClassBalance {
        flaring,
        nonflaring,
        imbalance_ratio,
    })
}

/// Instance counts per partition.
pub fn partition_sizes(ds: &Dataset) -> BTreeMap<String, usize> {
    let mut sizes = BTreeMap::new();
    for inst in ds.instances() {
        *sizes.entry(inst.partition_id.clone()).or_insert(0) += 1;
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::PlantedSignal;

    fn fixture(n: usize) -> Dataset {
        PlantedSignal {
            n_instances: n,
            n_parameters: 2,
            timesteps: 10,
            planted_parameter: 0,
            ..PlantedSignal::default()
        }
        .generate()
        .unwrap()
    }

    fn set(parts: &[&str]) -> BTreeSet<String> {
        parts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn split_by_partitions() {
        let ds = fixture(100);
        assert_eq!(partition_sizes(&ds).values().copied().collect::<Vec<_>>(), vec![20; 5]);
        let (train, test) =
            partition_split(&ds, &set(&["P1", "P2", "P3", "P4"]), &set(&["P5"])).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        let train_ids: BTreeSet<_> = train.instances().iter().map(|i| &i.instance_id).collect();
        let test_ids: BTreeSet<_> = test.instances().iter().map(|i| &i.instance_id).collect();
        assert!(train_ids.is_disjoint(&test_ids));
        assert_eq!(train_ids.len() + test_ids.len(), ds.len());
        assert!(test.instances().iter().all(|i| i.partition_id == "P5"));
    }

    #[test]
    fn split_rejects_bad_partition_sets() {
        let ds = fixture(20);
        assert!(matches!(
            partition_split(&ds, &set(&["P1"]), &set(&["P1"])),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            partition_split(&ds, &set(&["P1"]), &set(&["P9"])),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            partition_split(&ds, &set(&[]), &set(&["P1"])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn class_ratio_cases() {
        let ds = fixture(100);
        let r = class_ratio(&ds).unwrap();
        assert_eq!((r.flaring, r.nonflaring), (20, 80));
        assert_eq!(r.imbalance_ratio, 4.0);

        let flaring_only = ds.filter(|i| i.label.is_flaring());
        assert_eq!(class_ratio(&flaring_only).unwrap().imbalance_ratio, 0.0);
        let quiet_only = ds.filter(|i| !i.label.is_flaring());
        assert_eq!(class_ratio(&quiet_only).unwrap().imbalance_ratio, f64::INFINITY);
        assert!(matches!(class_ratio(&ds.filter(|_| false)), Err(Error::Argument(_))));
    }

    #[test]
    fn ten_to_ninety_is_nine() {
        let ds = fixture(100);
        let flaring: Vec<_> = ds.instances().iter().filter(|i| i.label.is_flaring()).take(10).cloned().collect();
        let quiet: Vec<_> = ds.instances().iter().filter(|i| !i.label.is_flaring()).take(80).cloned().collect();
        let mut more_quiet: Vec<_> = quiet[..10]
            .iter()
            .map(|i| TimeSeriesInstance {
                instance_id: format!("{}-dup", i.instance_id),
                ..i.clone()
            })
            .collect();
        more_quiet.extend(quiet);
        more_quiet.extend(flaring);
        let ds = Dataset::from_instances(more_quiet).unwrap();
        assert_eq!(class_ratio(&ds).unwrap().imbalance_ratio, 9.0);
    }

    #[test]
    fn dataset_rejects_duplicates_and_mismatched_parameters() {
        let ds = fixture(10);
        let mut insts = ds.clone().into_instances();
        insts.push(insts[0].clone());
        assert!(matches!(Dataset::from_instances(insts), Err(Error::Validation(_))));

        let mut insts = ds.into_instances();
        insts[3].parameter_names.reverse();
        assert!(matches!(Dataset::from_instances(insts), Err(Error::Validation(_))));
    }
}
