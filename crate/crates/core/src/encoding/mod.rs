//! Tabular feature encoding.
//!
//! A list of [`VariableSpec`]s describes how each raw variable becomes one or
//! more numerical columns. [`fit_schema`] learns vocabularies from a record
//! set and produces an [`EncodingSchema`], which [`encode_dataset`] then
//! applies to any record set. Real-valued variables that may be missing get a
//! paired `__missing` indicator column; categorical variables get optional
//! `<other>` and `<missing>` slots.

mod projection;
mod records;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use projection::{ProjectionSpec, SparseProjection};
pub use records::{read_records, read_records_csv, read_records_jsonl, RawRecord, RawValue, LIST_SEPARATOR};

use crate::error::{Error, Result};

pub const OTHER_SLOT: &str = "<other>";
pub const MISSING_SLOT: &str = "<missing>";

pub const SCHEMA_FORMAT: &str = "mdelm-schema/1";

/// How a raw variable is turned into columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariableKind {
    /// One binary column per category.
    Onehot {
        #[serde(default)]
        max_categories: Option<usize>,
        #[serde(default)]
        other_slot: bool,
        #[serde(default)]
        missing_slot: bool,
    },
    /// A single 0/1 column.
    Presence,
    /// Token counts, optionally reduced by a sparse random projection.
    BowProjected {
        /// Further text variables concatenated to this one before tokenizing.
        #[serde(default)]
        extra_fields: Vec<String>,
        #[serde(default)]
        max_tokens: Option<usize>,
        #[serde(default)]
        out_dim: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    /// `ln(reference_year - start + 1)` plus a missing flag.
    LogAge { reference_year: i64 },
    /// The value (0 when missing) plus a missing flag.
    RealWithIndicator,
    /// Number of distinct items; 0 when missing.
    Count,
    /// One binary column per category, several may be set.
    Multihot {
        #[serde(default)]
        max_categories: Option<usize>,
        #[serde(default)]
        missing_slot: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, kind: VariableKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// A variable with its learned vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedVariable {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
    #[serde(default)]
    pub vocabulary: Vec<String>,
    #[serde(default)]
    pub projection: Option<ProjectionSpec>,
}

impl FittedVariable {
    pub fn feature_names(&self) -> Vec<String> {
        let n = &self.name;
        match &self.kind {
            VariableKind::Onehot { .. } | VariableKind::Multihot { .. } => {
                self.vocabulary.iter().map(|c| format!("{n}={c}")).collect()
            }
            VariableKind::Presence => vec![format!("{n}__present")],
            VariableKind::BowProjected { .. } => match &self.projection {
                Some(p) => (0..p.out_dim).map(|k| format!("{n}__rp{k}")).collect(),
                None => self.vocabulary.iter().map(|t| format!("{n}__bow={t}")).collect(),
            },
            VariableKind::LogAge { .. } => vec![format!("{n}__log_age"), format!("{n}__missing")],
            VariableKind::RealWithIndicator => vec![n.clone(), format!("{n}__missing")],
            VariableKind::Count => vec![format!("{n}__count")],
        }
    }

    pub fn width(&self) -> usize {
        self.feature_names().len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSchema {
    pub format: String,
    pub variables: Vec<FittedVariable>,
}

impl EncodingSchema {
    pub fn feature_names(&self) -> Vec<String> {
        self.variables.iter().flat_map(FittedVariable::feature_names).collect()
    }

    pub fn n_features(&self) -> usize {
        self.variables.iter().map(FittedVariable::width).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(s)?;
        if schema.format != SCHEMA_FORMAT {
            return Err(Error::invalid(format!("unsupported schema format `{}`", schema.format)));
        }
        schema.validate()?;
        Ok(schema)
    }

    /// Hex SHA-256 of the ordered feature names.
    pub fn hash(&self) -> String {
        feature_names_hash(&self.feature_names())
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            let mut vocab = HashSet::new();
            if let Some(dup) = v.vocabulary.iter().find(|c| !vocab.insert(c.as_str())) {
                return Err(Error::invalid(format!("duplicate vocabulary entry `{dup}` in `{}`", v.name)));
            }
            if let Some(p) = &v.projection {
                p.validate()?;
                if p.in_dim != v.vocabulary.len() {
                    return Err(Error::invalid(format!(
                        "projection in_dim {} does not match vocabulary size {} for `{}`",
                        p.in_dim,
                        v.vocabulary.len(),
                        v.name
                    )));
                }
            }
        }
        let mut features = HashSet::new();
        for f in self.feature_names() {
            if !features.insert(f.clone()) {
                return Err(Error::invalid(format!("feature name `{f}` is not unique")));
            }
        }
        Ok(())
    }
}

pub fn feature_names_hash(names: &[String]) -> String {
    let mut hasher = Sha256::new();
    for n in names {
        hasher.update(n.as_bytes());
        hasher.update([0u8]);
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Encoded records: `n_samples x n_features`, row order = record order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub sample_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// CSV with header `id,<feature names>`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.sample_ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.values.row(i).iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lowercase, split on non-alphanumerics, drop single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() > 1)
        .map(str::to_lowercase)
        .collect()
}

/// Ranks keys by count descending, ties lexicographically.
fn rank_by_frequency(counts: HashMap<String, usize>, max: Option<usize>) -> Vec<String> {
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let keep = max.unwrap_or(ranked.len()).min(ranked.len());
    ranked.truncate(keep);
    ranked.into_iter().map(|(k, _)| k).collect()
}

fn check_max(name: &str, max: Option<usize>) -> Result<()> {
    if max == Some(0) {
        return Err(Error::invalid(format!("max vocabulary size for `{name}` must be at least 1")));
    }
    Ok(())
}

fn bow_text(record: &RawRecord, fields: impl Iterator<Item = String>) -> Option<String> {
    let parts: Vec<String> = fields
        .filter_map(|f| record.get(&f).map(RawValue::as_category))
        .collect();
    (!parts.is_empty()).then(|| parts.join(" "))
}

fn bow_fields<'a>(name: &'a str, extra: &'a [String]) -> impl Iterator<Item = String> + 'a {
    std::iter::once(name.to_string()).chain(extra.iter().cloned())
}

/// Learns vocabularies and projection specs from `records`.
pub fn fit_schema(records: &[RawRecord], specs: &[VariableSpec]) -> Result<EncodingSchema> {
    if records.is_empty() {
        return Err(Error::invalid("cannot fit a schema on zero records"));
    }
    let mut seen = HashSet::new();
    for s in specs {
        if !seen.insert(s.name.as_str()) {
            return Err(Error::DuplicateVariable(s.name.clone()));
        }
    }

    let mut variables = Vec::with_capacity(specs.len());
    for spec in specs {
        let name = spec.name.as_str();
        let (vocabulary, projection) = match &spec.kind {
            VariableKind::Onehot {
                max_categories,
                other_slot,
                missing_slot,
            } => {
                check_max(name, *max_categories)?;
                let mut counts = HashMap::new();
                for r in records {
                    if let Some(v) = r.get(name) {
                        *counts.entry(v.as_category()).or_insert(0) += 1;
                    }
                }
                let observed = !counts.is_empty();
                let mut vocab = rank_by_frequency(counts, *max_categories);
                if *other_slot && observed {
                    vocab.push(OTHER_SLOT.to_string());
                }
                if *missing_slot || !observed {
                    vocab.push(MISSING_SLOT.to_string());
                }
                (vocab, None)
            }
            VariableKind::Multihot {
                max_categories,
                missing_slot,
            } => {
                check_max(name, *max_categories)?;
                let mut counts = HashMap::new();
                for r in records {
                    if let Some(v) = r.get(name) {
                        let items: BTreeMap<String, ()> = v.items().into_iter().map(|i| (i, ())).collect();
                        for item in items.into_keys() {
                            *counts.entry(item).or_insert(0) += 1;
                        }
                    }
                }
                let observed = !counts.is_empty();
                let mut vocab = rank_by_frequency(counts, *max_categories);
                if *missing_slot || !observed {
                    vocab.push(MISSING_SLOT.to_string());
                }
                (vocab, None)
            }
            VariableKind::BowProjected {
                extra_fields,
                max_tokens,
                out_dim,
                seed,
            } => {
                check_max(name, *max_tokens)?;
                let mut counts = HashMap::new();
                for r in records {
                    if let Some(text) = bow_text(r, bow_fields(name, extra_fields)) {
                        for t in tokenize(&text) {
                            *counts.entry(t).or_insert(0) += 1;
                        }
                    }
                }
                let vocab = rank_by_frequency(counts, *max_tokens);
                let projection = match out_dim {
                    Some(d) => {
                        let p = ProjectionSpec::with_default_density(vocab.len(), *d, *seed);
                        p.validate()?;
                        Some(p)
                    }
                    None => None,
                };
                (vocab, projection)
            }
            VariableKind::Presence
            | VariableKind::LogAge { .. }
            | VariableKind::RealWithIndicator
            | VariableKind::Count => (Vec::new(), None),
        };
        variables.push(FittedVariable {
            name: spec.name.clone(),
            kind: spec.kind.clone(),
            vocabulary,
            projection,
        });
    }

    let schema = EncodingSchema {
        format: SCHEMA_FORMAT.to_string(),
        variables,
    };
    schema.validate()?;
    Ok(schema)
}

/// One-hot over `vocab`. Known values hit their slot; unseen values go to
/// `<other>` (else `<missing>`); missing values go to `<missing>` (else
/// `<other>`). When no fallback slot exists the vector is all zero.
pub fn encode_onehot(value: Option<&str>, vocab: &[String], include_missing: bool) -> Vec<f64> {
    let mut out = vec![0.0; vocab.len() + usize::from(include_missing)];
    let find = |key: &str| vocab.iter().position(|c| c == key);
    let missing_slot = if include_missing {
        Some(vocab.len())
    } else {
        find(MISSING_SLOT)
    };
    let other_slot = find(OTHER_SLOT);
    let value = value.map(str::trim).filter(|v| !v.is_empty());
    let slot = match value {
        Some(v) => find(v).or(other_slot).or(missing_slot),
        None => missing_slot.or(other_slot),
    };
    if let Some(k) = slot {
        out[k] = 1.0;
    }
    out
}

/// 1 when present and non-empty, else 0.
pub fn encode_presence(value: Option<&RawValue>) -> f64 {
    match value {
        Some(v) if !v.is_missing() => 1.0,
        _ => 0.0,
    }
}

/// `(ln(reference_year - start_year + 1), 0)`, or `(0, 1)` when missing.
pub fn encode_log_age(start_year: Option<i64>, reference_year: i64) -> Result<(f64, f64)> {
    match start_year {
        None => Ok((0.0, 1.0)),
        Some(start) if start > reference_year => Err(Error::invalid(format!(
            "start year {start} is after reference year {reference_year}"
        ))),
        Some(start) => Ok((((reference_year - start + 1) as f64).ln(), 0.0)),
    }
}

/// Token counts over `vocabulary`; out-of-vocabulary tokens are dropped.
pub fn encode_bow(text: Option<&str>, vocabulary: &[String]) -> Vec<f64> {
    let mut out = vec![0.0; vocabulary.len()];
    if let Some(text) = text {
        let index: HashMap<&str, usize> = vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        for t in tokenize(text) {
            if let Some(&i) = index.get(t.as_str()) {
                out[i] += 1.0;
            }
        }
    }
    out
}

fn mismatch(record: &RawRecord, variable: &str, message: impl Into<String>) -> Error {
    Error::TypeMismatch {
        record: record.id.clone(),
        variable: variable.to_string(),
        message: message.into(),
    }
}

fn numeric(record: &RawRecord, name: &str, value: &RawValue) -> Result<f64> {
    let x = match value {
        RawValue::Number(x) => *x,
        RawValue::Text(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| mismatch(record, name, format!("expected a number, found `{s}`")))?,
        RawValue::List(_) => return Err(mismatch(record, name, "expected a number, found a list")),
    };
    if !x.is_finite() {
        return Err(mismatch(record, name, format!("non-finite value {x}")));
    }
    Ok(x)
}

struct Encoder<'a> {
    var: &'a FittedVariable,
    projection: Option<SparseProjection>,
    vocab_index: HashMap<&'a str, usize>,
}

impl<'a> Encoder<'a> {
    fn new(var: &'a FittedVariable) -> Result<Self> {
        let projection = var.projection.map(SparseProjection::new).transpose()?;
        let vocab_index = var
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        Ok(Self {
            var,
            projection,
            vocab_index,
        })
    }

    fn encode(&self, record: &RawRecord, out: &mut Vec<f64>) -> Result<()> {
        let name = self.var.name.as_str();
        let value = record.get(name);
        match &self.var.kind {
            VariableKind::Onehot { .. } => {
                let cat = value.map(RawValue::as_category);
                out.extend(encode_onehot(cat.as_deref(), &self.var.vocabulary, false));
            }
            VariableKind::Multihot { .. } => {
                let mut row = vec![0.0; self.var.vocabulary.len()];
                match value {
                    Some(v) => {
                        for item in v.items() {
                            if let Some(&k) = self.vocab_index.get(item.as_str()) {
                                row[k] = 1.0;
                            }
                        }
                    }
                    None => {
                        if let Some(&k) = self.vocab_index.get(MISSING_SLOT) {
                            row[k] = 1.0;
                        }
                    }
                }
                out.extend(row);
            }
            VariableKind::Presence => out.push(encode_presence(value)),
            VariableKind::BowProjected { extra_fields, .. } => {
                let text = bow_text(record, bow_fields(name, extra_fields));
                let counts = encode_bow(text.as_deref(), &self.var.vocabulary);
                match &self.projection {
                    Some(p) => out.extend(p.project(&counts)?),
                    None => out.extend(counts),
                }
            }
            VariableKind::LogAge { reference_year } => {
                let start = match value {
                    None => None,
                    Some(v) => {
                        let x = numeric(record, name, v)?;
                        if x.fract() != 0.0 {
                            return Err(mismatch(record, name, format!("expected an integer year, found {x}")));
                        }
                        Some(x as i64)
                    }
                };
                let (age, flag) =
                    encode_log_age(start, *reference_year).map_err(|e| mismatch(record, name, e.to_string()))?;
                out.push(age);
                out.push(flag);
            }
            VariableKind::RealWithIndicator => match value {
                None => out.extend([0.0, 1.0]),
                Some(v) => {
                    out.push(numeric(record, name, v)?);
                    out.push(0.0);
                }
            },
            VariableKind::Count => {
                let n = match value {
                    None => 0.0,
                    Some(RawValue::Number(x)) if x.is_finite() && *x >= 0.0 => *x,
                    Some(RawValue::Number(x)) => {
                        return Err(mismatch(record, name, format!("invalid count {x}")));
                    }
                    Some(v) => v.items().into_iter().collect::<HashSet<_>>().len() as f64,
                };
                out.push(n);
            }
        }
        Ok(())
    }
}

/// Encodes `records` with `schema`; column order follows the schema.
pub fn encode_dataset(records: &[RawRecord], schema: &EncodingSchema) -> Result<FeatureMatrix> {
    let encoders = schema
        .variables
        .iter()
        .map(Encoder::new)
        .collect::<Result<Vec<_>>>()?;
    let feature_names = schema.feature_names();
    let width = feature_names.len();
    let mut data = Vec::with_capacity(records.len() * width);
    let mut row = Vec::with_capacity(width);
    for r in records {
        row.clear();
        for enc in &encoders {
            enc.encode(r, &mut row)?;
        }
        debug_assert_eq!(row.len(), width);
        data.extend_from_slice(&row);
    }
    Ok(FeatureMatrix {
        sample_ids: records.iter().map(|r| r.id.clone()).collect(),
        feature_names,
        values: DMatrix::from_row_slice(records.len(), width, &data),
    })
}
