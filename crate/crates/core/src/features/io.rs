use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureDescriptor, FeatureMatrix, FeatureSlot, PoolKind, Statistic, WindowConfig};
use crate::error::{Error, Result};

pub const FEATURES_FILE: &str = "features.csv";
pub const DESCRIPTORS_FILE: &str = "descriptors.json";

const LEADING: [&str; 3] = ["instance_id", "partition_id", "label"];

#[derive(Serialize, Deserialize)]
struct DescriptorRecord {
    canonical_id: String,
    parameter: String,
    window: usize,
    step: usize,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pool: Option<PoolKind>,
    statistic: Statistic,
}

impl From<&FeatureDescriptor> for DescriptorRecord {
    fn from(d: &FeatureDescriptor) -> Self {
        let (kind, interval_index, pool) = match d.slot {
            FeatureSlot::Interval(i) => ("interval", Some(i), None),
            FeatureSlot::Pooled(p) => ("pooled", None, Some(p)),
        };
        Self {
            canonical_id: d.canonical_id(),
            parameter: d.parameter.clone(),
            window: d.scale.window(),
            step: d.scale.step(),
            kind: kind.into(),
            interval_index,
            pool,
            statistic: d.statistic,
        }
    }
}

impl TryFrom<DescriptorRecord> for FeatureDescriptor {
    type Error = Error;

    fn try_from(r: DescriptorRecord) -> Result<Self> {
        let slot = match (r.kind.as_str(), r.interval_index, r.pool) {
            ("interval", Some(i), None) => FeatureSlot::Interval(i),
            ("pooled", None, Some(p)) => FeatureSlot::Pooled(p),
            _ => return Err(Error::Validation(format!("inconsistent descriptor {}", r.canonical_id))),
        };
        let d = FeatureDescriptor {
            parameter: r.parameter,
            scale: WindowConfig::new(r.window, r.step)?,
            slot,
            statistic: r.statistic,
        };
        if d.canonical_id() != r.canonical_id {
            return Err(Error::Validation(format!(
                "descriptor fields do not match id {}",
                r.canonical_id
            )));
        }
        Ok(d)
    }
}

/// Writes `features.csv` (instance_id, partition_id, label, then one column
/// per canonical feature id) and the `descriptors.json` sidecar.
pub fn write_feature_matrix(fm: &FeatureMatrix, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = LEADING.iter().map(|s| s.to_string()).collect();
    header.extend(fm.feature_ids());
    wtr.write_record(&header)?;
    for r in 0..fm.n_rows() {
        let mut rec = vec![
            fm.instance_ids()[r].clone(),
            fm.partition_ids()[r].clone(),
            fm.labels()[r].to_string(),
        ];
        rec.extend(fm.row(r).iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::io(dir, e.into_error()))?;
    let path = dir.join(FEATURES_FILE);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;

    let records: Vec<DescriptorRecord> = fm.descriptors().iter().map(Into::into).collect();
    let path = dir.join(DESCRIPTORS_FILE);
    let mut text = serde_json::to_string_pretty(&records)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_feature_matrix(dir: &Path) -> Result<FeatureMatrix> {
    let path = dir.join(DESCRIPTORS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let records: Vec<DescriptorRecord> = serde_json::from_str(&text)?;
    let descriptors = records
        .into_iter()
        .map(FeatureDescriptor::try_from)
        .collect::<Result<Vec<_>>>()?;

    let path = dir.join(FEATURES_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<String> = LEADING
        .iter()
        .map(|s| s.to_string())
        .chain(descriptors.iter().map(FeatureDescriptor::canonical_id))
        .collect();
    if header != expected {
        return Err(Error::Schema(format!(
            "{}: header does not match {DESCRIPTORS_FILE}",
            path.display()
        )));
    }
    let (mut ids, mut parts, mut labels, mut values) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        parts.push(rec[1].to_string());
        labels.push(rec[2].parse()?);
        for cell in rec.iter().skip(LEADING.len()) {
            values.push(
                cell.parse::<f64>()
                    .map_err(|_| Error::Validation(format!("bad feature value {cell:?}")))?,
            );
        }
    }
    FeatureMatrix::new(descriptors, values, ids, parts, labels)
}
