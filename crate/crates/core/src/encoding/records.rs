//! Raw tabular records and their CSV / JSON-lines readers.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Separator for multi-valued cells in CSV input.
pub const LIST_SEPARATOR: char = ';';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Text(String),
    List(Vec<String>),
}

impl RawValue {
    /// Empty strings and empty lists count as missing.
    pub fn is_missing(&self) -> bool {
        match self {
            RawValue::Number(_) => false,
            RawValue::Text(s) => s.trim().is_empty(),
            RawValue::List(items) => items.iter().all(|s| s.trim().is_empty()),
        }
    }

    /// Scalar rendering used as a category key.
    pub fn as_category(&self) -> String {
        match self {
            RawValue::Number(x) => x.to_string(),
            RawValue::Text(s) => s.trim().to_string(),
            RawValue::List(items) => items.join(&LIST_SEPARATOR.to_string()),
        }
    }

    /// Items of a multi-valued cell, trimmed, empty items dropped.
    pub fn items(&self) -> Vec<String> {
        let raw: Vec<String> = match self {
            RawValue::Number(x) => vec![x.to_string()],
            RawValue::Text(s) => s.split(LIST_SEPARATOR).map(str::to_string).collect(),
            RawValue::List(items) => items.clone(),
        };
        raw.into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub values: BTreeMap<String, RawValue>,
}

impl RawRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: RawValue) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn text(self, key: &str, value: &str) -> Self {
        self.with(key, RawValue::Text(value.to_string()))
    }

    pub fn number(self, key: &str, value: f64) -> Self {
        self.with(key, RawValue::Number(value))
    }

    /// The value under `key`, or `None` when absent or empty.
    pub fn get(&self, key: &str) -> Option<&RawValue> {
        self.values.get(key).filter(|v| !v.is_missing())
    }
}

fn check_ids(records: &[RawRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if r.id.is_empty() {
            return Err(Error::invalid("record with empty id"));
        }
        if !seen.insert(r.id.as_str()) {
            return Err(Error::invalid(format!("duplicate record id `{}`", r.id)));
        }
    }
    Ok(())
}

/// Reads CSV records with a header row. The `id` column is required; every
/// other cell is kept as text and empty cells are omitted.
pub fn read_records_csv<R: Read>(reader: R, source: &str) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::MissingColumn {
            path: source.to_string(),
            column: "id".into(),
        })?;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let mut rec = RawRecord::new(row.get(id_col).unwrap_or_default());
        for (col, (name, cell)) in headers.iter().zip(row.iter()).enumerate() {
            if col != id_col && !cell.trim().is_empty() {
                rec.values.insert(name.to_string(), RawValue::Text(cell.to_string()));
            }
        }
        records.push(rec);
    }
    check_ids(&records)?;
    Ok(records)
}

/// Reads one JSON object per line. `id` may be a string or an integer;
/// `null` values are omitted.
pub fn read_records_jsonl<R: Read>(reader: R, source: &str) -> Result<Vec<RawRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedCell {
            path: source.to_string(),
            row: lineno + 1,
            column: "<record>".into(),
            message,
        };
        let obj = match serde_json::from_str::<Value>(&line)? {
            Value::Object(obj) => obj,
            _ => return Err(malformed("expected a JSON object".into())),
        };
        let id = match obj.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(malformed("missing or invalid `id`".into())),
        };
        let mut rec = RawRecord::new(id);
        for (key, value) in obj {
            if key == "id" {
                continue;
            }
            let raw = match value {
                Value::Null => continue,
                Value::Number(n) => RawValue::Number(n.as_f64().unwrap_or(f64::NAN)),
                Value::String(s) => RawValue::Text(s),
                Value::Bool(b) => RawValue::Text(b.to_string()),
                Value::Array(items) => RawValue::List(
                    items
                        .into_iter()
                        .map(|v| match v {
                            Value::String(s) => Ok(s),
                            Value::Number(n) => Ok(n.to_string()),
                            other => Err(malformed(format!("unsupported list item {other} in `{key}`"))),
                        })
                        .collect::<Result<_>>()?,
                ),
                Value::Object(_) => return Err(malformed(format!("nested object in `{key}`"))),
            };
            rec.values.insert(key, raw);
        }
        records.push(rec);
    }
    check_ids(&records)?;
    Ok(records)
}

/// Dispatches on extension: `.jsonl` / `.ndjson` / `.json` read as JSON lines,
/// everything else as CSV.
pub fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    let source = path.display().to_string();
    let file = File::open(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "ndjson" | "json") => read_records_jsonl(file, &source),
        _ => read_records_csv(file, &source),
    }
}
