//! Manifest + per-instance delimited files.
//!
//! The manifest is a JSON array with one object per instance
//! (`instance_id`, `file`, `partition_id`, `label`, optional `ar_number`,
//! `start_ts`, `end_ts`). Each instance file has a header of one timestamp
//! column followed by parameter columns, one row per timestep. Missing
//! values are spelled `NaN` or left empty.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{binarize_label, Dataset, FlareLabel, TimeSeriesInstance};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Names of the manifest keys and instance-file columns to read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSchema {
    pub id_key: String,
    pub file_key: String,
    pub partition_key: String,
    pub label_key: String,
    pub ar_key: String,
    pub start_key: String,
    pub end_key: String,
    /// Matched case-insensitively against the instance-file header.
    pub timestamp_column: String,
    /// Parameter columns in order; `None` takes every non-timestamp column
    /// of the first instance file (by instance id).
    pub parameters: Option<Vec<String>>,
}

impl Default for IngestSchema {
    fn default() -> Self {
        Self {
            id_key: "instance_id".into(),
            file_key: "file".into(),
            partition_key: "partition_id".into(),
            label_key: "label".into(),
            ar_key: "ar_number".into(),
            start_key: "start_ts".into(),
            end_key: "end_ts".into(),
            timestamp_column: "timestamp".into(),
            parameters: None,
        }
    }
}

struct ManifestEntry {
    instance_id: String,
    file: PathBuf,
    partition_id: String,
    raw_label: FlareLabel,
    ar_number: Option<i64>,
    start_ts: DateTime<Utc>,
    end_ts: DateTime<Utc>,
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|naive| naive.and_utc())
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

fn string_field(obj: &Map<String, Value>, key: &str, idx: usize) -> Result<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        _ => Err(Error::Schema(format!("manifest entry {idx}: missing key {key:?}"))),
    }
}

fn timestamp_field(obj: &Map<String, Value>, key: &str, idx: usize) -> Result<DateTime<Utc>> {
    let raw = string_field(obj, key, idx)?;
    parse_timestamp(&raw)
        .ok_or_else(|| Error::Validation(format!("manifest entry {idx}: bad timestamp {raw:?} in {key:?}")))
}

fn read_manifest(path: &Path, schema: &IngestSchema) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<Map<String, Value>> = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::with_capacity(raw.len());
    for (idx, obj) in raw.iter().enumerate() {
        let ar_number = match obj.get(&schema.ar_key) {
            None | Some(Value::Null) => None,
            Some(Value::Number(n)) => n.as_i64(),
            Some(Value::String(s)) if s.trim().is_empty() => None,
            Some(Value::String(s)) => Some(s.trim().parse().map_err(|_| {
                Error::Validation(format!("manifest entry {idx}: bad ar_number {s:?}"))
            })?),
            Some(other) => {
                return Err(Error::Validation(format!("manifest entry {idx}: bad ar_number {other}")))
            }
        };
        entries.push(ManifestEntry {
            instance_id: string_field(obj, &schema.id_key, idx)?,
            file: base.join(string_field(obj, &schema.file_key, idx)?),
            partition_id: string_field(obj, &schema.partition_key, idx)?,
            raw_label: string_field(obj, &schema.label_key, idx)?.parse()?,
            ar_number,
            start_ts: timestamp_field(obj, &schema.start_key, idx)?,
            end_ts: timestamp_field(obj, &schema.end_key, idx)?,
        });
    }
    entries.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    Ok(entries)
}

fn delimiter_for(header_line: &str) -> u8 {
    if header_line.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    let first_line = text.lines().next().unwrap_or("");
    csv::ReaderBuilder::new()
        .delimiter(delimiter_for(first_line))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn header_of(path: &Path) -> Result<Vec<String>> {
    let text = read_text(path)?;
    let mut rdr = reader(&text);
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

fn parse_value(cell: &str) -> Option<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    cell.parse().ok()
}

enum FileProblem {
    Ragged,
    Other(Error),
}

fn read_instance(
    entry: &ManifestEntry,
    schema: &IngestSchema,
    parameters: &[String],
) -> std::result::Result<TimeSeriesInstance, FileProblem> {
    let text = read_text(&entry.file).map_err(FileProblem::Other)?;
    let mut rdr = reader(&text);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| FileProblem::Other(e.into()))?
        .iter()
        .map(str::to_string)
        .collect();
    let file = entry.file.display();
    let ts_col = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case(&schema.timestamp_column))
        .ok_or_else(|| {
            FileProblem::Other(Error::Schema(format!(
                "{file}: missing timestamp column {:?}",
                schema.timestamp_column
            )))
        })?;
    let mut cols = Vec::with_capacity(parameters.len());
    for p in parameters {
        let c = header.iter().position(|h| h == p).ok_or_else(|| {
            FileProblem::Other(Error::Schema(format!("{file}: missing parameter column {p:?}")))
        })?;
        cols.push(c);
    }

    let mut rows: Vec<(DateTime<Utc>, Vec<f64>)> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| FileProblem::Other(e.into()))?;
        if record.len() != header.len() {
            return Err(FileProblem::Ragged);
        }
        let ts = parse_timestamp(&record[ts_col]).ok_or_else(|| {
            FileProblem::Other(Error::Validation(format!(
                "{file}: row {}: bad timestamp {:?}",
                line + 1,
                &record[ts_col]
            )))
        })?;
        let mut values = Vec::with_capacity(cols.len());
        for (&c, p) in cols.iter().zip(parameters) {
            let v = parse_value(&record[c]).ok_or_else(|| {
                FileProblem::Other(Error::Validation(format!(
                    "{file}: row {}: bad value {:?} for {p}",
                    line + 1,
                    &record[c]
                )))
            })?;
            values.push(v);
        }
        rows.push((ts, values));
    }
    rows.sort_by_key(|(ts, _)| *ts);

    let mut values = vec![Vec::with_capacity(rows.len()); parameters.len()];
    let mut timestamps = Vec::with_capacity(rows.len());
    for (ts, row) in rows {
        timestamps.push(ts);
        for (series, v) in values.iter_mut().zip(row) {
            series.push(v);
        }
    }
    let inst = TimeSeriesInstance {
        instance_id: entry.instance_id.clone(),
        ar_number: entry.ar_number,
        partition_id: entry.partition_id.clone(),
        start_ts: entry.start_ts,
        end_ts: entry.end_ts,
        timestamps,
        parameter_names: parameters.to_vec(),
        values,
        label: binarize_label(&entry.raw_label),
        raw_label: entry.raw_label,
    };
    inst.validate().map_err(FileProblem::Other)?;
    Ok(inst)
}

/// Reads a manifest (or a directory containing `manifest.json`) and every
/// instance file it names. Values may still contain NaN.
pub fn load_dataset(path: &Path, schema: &IngestSchema) -> Result<Dataset> {
    let manifest = manifest_path(path);
    let entries = read_manifest(&manifest, schema)?;
    let parameters = match &schema.parameters {
        Some(p) => p.clone(),
        None => match entries.first() {
            Some(first) => header_of(&first.file)?
                .into_iter()
                .filter(|h| !h.eq_ignore_ascii_case(&schema.timestamp_column))
                .collect(),
            None => Vec::new(),
        },
    };

    let results: Vec<_> = entries
        .par_iter()
        .map(|e| read_instance(e, schema, &parameters))
        .collect();

    let mut ragged = Vec::new();
    let mut instances = Vec::with_capacity(results.len());
    let mut first_error = None;
    for (entry, res) in entries.iter().zip(results) {
        match res {
            Ok(inst) => instances.push(inst),
            Err(FileProblem::Ragged) => ragged.push(entry.instance_id.clone()),
            Err(FileProblem::Other(e)) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    if !ragged.is_empty() {
        return Err(Error::Validation(format!(
            "ragged series lengths in instances: {}",
            ragged.join(", ")
        )));
    }
    Dataset::new(parameters, instances)
}

fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Writes `dir/manifest.json` and `dir/instances/<id>.csv`. Output bytes
/// depend only on the dataset contents.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    let inst_dir = dir.join("instances");
    fs::create_dir_all(&inst_dir).map_err(|e| Error::io(&inst_dir, e))?;
    let mut manifest = Vec::with_capacity(ds.len());
    let mut used = std::collections::BTreeSet::new();
    for inst in ds.instances() {
        let stem = file_stem_for(&inst.instance_id);
        if !used.insert(stem.clone()) {
            return Err(Error::Validation(format!(
                "instance ids collide after file-name sanitising: {stem}"
            )));
        }
        let rel = format!("instances/{stem}.csv");
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["timestamp".to_string()];
        header.extend(inst.parameter_names.iter().cloned());
        wtr.write_record(&header)?;
        for (t, ts) in inst.timestamps.iter().enumerate() {
            let mut row = vec![format_timestamp(ts)];
            row.extend(inst.values.iter().map(|series| series[t].to_string()));
            wtr.write_record(&row)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::io(dir, e.into_error()))?;
        let path = dir.join(&rel);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;

        let mut obj = Map::new();
        obj.insert("instance_id".into(), Value::String(inst.instance_id.clone()));
        obj.insert("file".into(), Value::String(rel));
        obj.insert("partition_id".into(), Value::String(inst.partition_id.clone()));
        obj.insert("label".into(), Value::String(inst.raw_label.to_string()));
        if let Some(ar) = inst.ar_number {
            obj.insert("ar_number".into(), Value::from(ar));
        }
        obj.insert("start_ts".into(), Value::String(format_timestamp(&inst.start_ts)));
        obj.insert("end_ts".into(), Value::String(format_timestamp(&inst.end_ts)));
        manifest.push(Value::Object(obj));
    }
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
