use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Dataset, TimeSeriesInstance};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputePolicy {
    /// Linear interpolation between the nearest finite neighbours, then
    /// forward/backward fill at the edges.
    #[default]
    Linear,
    /// Replace every non-finite value with zero.
    Zero,
}

impl FromStr for ImputePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ImputePolicy::Linear),
            "zero" => Ok(ImputePolicy::Zero),
            other => Err(Error::Argument(format!("unknown impute policy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputeOutcome {
    pub instance: TimeSeriesInstance,
    /// Parameters with no finite value at all; these were zero-filled.
    pub all_missing: Vec<String>,
}

impl ImputeOutcome {
    pub fn flagged(&self) -> bool {
        !self.all_missing.is_empty()
    }
}

/// Flagged instances from a dataset-wide imputation pass.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputeReport {
    pub policy: ImputePolicy,
    /// (instance_id, parameters that were entirely missing)
    pub flagged: Vec<(String, Vec<String>)>,
}

pub fn impute_missing(instance: &TimeSeriesInstance, policy: ImputePolicy) -> ImputeOutcome {
    let mut out = instance.clone();
    let mut all_missing = Vec::new();
    for (name, row) in out.parameter_names.iter().zip(out.values.iter_mut()) {
        if !row.iter().any(|v| v.is_finite()) {
            row.iter_mut().for_each(|v| *v = 0.0);
            all_missing.push(name.clone());
            continue;
        }
        match policy {
            ImputePolicy::Linear => fill_linear(row),
            ImputePolicy::Zero => row.iter_mut().filter(|v| !v.is_finite()).for_each(|v| *v = 0.0),
        }
    }
    ImputeOutcome {
        instance: out,
        all_missing,
    }
}

fn fill_linear(row: &mut [f64]) {
    let valid: Vec<usize> = (0..row.len()).filter(|&i| row[i].is_finite()).collect();
    if valid.len() == row.len() {
        return;
    }
    let first = valid[0];
    let last = *valid.last().unwrap();
    let (head_value, tail_value) = (row[first], row[last]);
    row[..first].iter_mut().for_each(|v| *v = head_value);
    row[last + 1..].iter_mut().for_each(|v| *v = tail_value);
    for pair in valid.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi - lo < 2 {
            continue;
        }
        let (v0, v1) = (row[lo], row[hi]);
        let span = (hi - lo) as f64;
        for (step, v) in row[lo + 1..hi].iter_mut().enumerate() {
            *v = v0 + (v1 - v0) * ((step + 1) as f64 / span);
        }
    }
}

pub fn impute_dataset(ds: &Dataset, policy: ImputePolicy) -> Result<(Dataset, ImputeReport)> {
    let mut flagged = Vec::new();
    let mut instances = Vec::with_capacity(ds.len());
    for inst in ds.instances() {
        let outcome = impute_missing(inst, policy);
        if outcome.flagged() {
            flagged.push((inst.instance_id.clone(), outcome.all_missing));
        }
        instances.push(outcome.instance);
    }
    let ds = Dataset::new(ds.parameter_names().to_vec(), instances)?;
    Ok((ds, ImputeReport { policy, flagged }))
}
