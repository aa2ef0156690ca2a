//! Labelled datasets: CSV ingestion, focus-class subsampling and synthetic
//! blobs with known label flips.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoding::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, other_label, rng_from_seed, sample_without_replacement};

pub const ID_COLUMN: &str = "id";
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != features.n_samples() || features.sample_ids.len() != features.n_samples() {
            return Err(Error::DimensionMismatch {
                expected: features.n_samples(),
                found: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return Err(Error::LabelOutOfRange {
                index,
                label,
                n_classes,
            });
        }
        Ok(Self {
            features,
            labels,
            n_classes,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_features()
    }

    pub fn ids(&self) -> &[String] {
        &self.features.sample_ids
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.features.values
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let x = &self.features.values;
        Dataset {
            features: FeatureMatrix {
                sample_ids: rows.iter().map(|&r| self.features.sample_ids[r].clone()).collect(),
                feature_names: self.features.feature_names.clone(),
                values: DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)]),
            },
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// Columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_features()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n: self.n_features(),
            });
        }
        let x = &self.features.values;
        Ok(Dataset {
            features: FeatureMatrix {
                sample_ids: self.features.sample_ids.clone(),
                feature_names: cols.iter().map(|&c| self.features.feature_names[c].clone()).collect(),
                values: DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])]),
            },
            labels: self.labels.clone(),
            n_classes: self.n_classes,
        })
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset> {
        Dataset::new(self.features.clone(), labels, self.n_classes)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![ID_COLUMN.to_string(), LABEL_COLUMN.to_string()];
        header.extend(self.features.feature_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_samples() {
            let mut row = vec![self.features.sample_ids[i].clone(), self.labels[i].to_string()];
            row.extend(self.features.values.row(i).iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `id,label,<features...>`; extra columns are features in file
    /// order. With `n_classes = None` the class count is `max label + 1`.
    pub fn read_csv<R: Read>(reader: R, source: &str, n_classes: Option<usize>) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    path: source.to_string(),
                    column: name.to_string(),
                })
        };
        let id_col = find(ID_COLUMN)?;
        let label_col = find(LABEL_COLUMN)?;
        let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != id_col && c != label_col).collect();
        let feature_names: Vec<String> = feature_cols.iter().map(|&c| headers[c].to_string()).collect();

        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (r, row) in rdr.records().enumerate() {
            let row = row?;
            let row_no = r + 1;
            let bad = |col: usize, message: String| Error::MalformedCell {
                path: source.to_string(),
                row: row_no,
                column: headers.get(col).unwrap_or("?").to_string(),
                message,
            };
            ids.push(row.get(id_col).unwrap_or_default().to_string());
            let label_cell = row.get(label_col).unwrap_or_default().trim();
            let label: usize = label_cell
                .parse()
                .map_err(|_| bad(label_col, format!("invalid label `{label_cell}`")))?;
            if let Some(c) = n_classes {
                if label >= c {
                    return Err(bad(label_col, format!("label {label} out of range for {c} classes")));
                }
            }
            labels.push(label);
            for &c in &feature_cols {
                let cell = row.get(c).unwrap_or_default().trim();
                let v: f64 = cell.parse().map_err(|_| bad(c, format!("invalid number `{cell}`")))?;
                if !v.is_finite() {
                    return Err(bad(c, format!("non-finite value `{cell}`")));
                }
                data.push(v);
            }
        }
        let n_classes = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        let features = FeatureMatrix {
            sample_ids: ids,
            feature_names,
            values: DMatrix::from_row_slice(labels.len(), feature_cols.len(), &data),
        };
        Dataset::new(features, labels, n_classes)
    }
}

pub fn load_csv(path: &Path, n_classes: Option<usize>) -> Result<Dataset> {
    Dataset::read_csv(File::open(path)?, &path.display().to_string(), n_classes)
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    dataset.write_csv(File::create(path)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleMode {
    /// Uniform draw from all non-focus samples together.
    #[default]
    Pooled,
    /// Per-class draws proportional to the non-focus class sizes.
    Stratified,
}

/// Keeps every focus-class sample plus `n_other` non-focus samples. Output
/// rows keep their original relative order.
pub fn subsample_focus(
    dataset: &Dataset,
    focus_class: usize,
    n_other: usize,
    seed: u64,
    mode: SubsampleMode,
) -> Result<Dataset> {
    let (focus, others): (Vec<usize>, Vec<usize>) =
        (0..dataset.n_samples()).partition(|&i| dataset.labels[i] == focus_class);
    if focus.is_empty() {
        return Err(Error::EmptyClass(focus_class));
    }
    if n_other > others.len() {
        return Err(Error::invalid(format!(
            "requested {n_other} non-focus samples but only {} exist",
            others.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut chosen: Vec<usize> = match mode {
        SubsampleMode::Pooled => sample_without_replacement(&mut rng, others.len(), n_other)
            .into_iter()
            .map(|k| others[k])
            .collect(),
        SubsampleMode::Stratified => {
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes];
            for &i in &others {
                by_class[dataset.labels[i]].push(i);
            }
            let quotas = proportional_quotas(&by_class.iter().map(Vec::len).collect::<Vec<_>>(), n_other);
            by_class
                .iter()
                .zip(quotas)
                .flat_map(|(members, q)| {
                    sample_without_replacement(&mut rng, members.len(), q)
                        .into_iter()
                        .map(|k| members[k])
                        .collect::<Vec<_>>()
                })
                .collect()
        }
    };
    chosen.extend(focus);
    chosen.sort_unstable();
    Ok(dataset.select_rows(&chosen))
}

/// Largest-remainder allocation of `total` proportional to `sizes`.
fn proportional_quotas(sizes: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = sizes.iter().sum();
    if sum == 0 {
        return vec![0; sizes.len()];
    }
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| s * total / sum).collect();
    let mut rema: Vec<(usize, usize)> = sizes.iter().enumerate().map(|(k, &s)| ((s * total) % sum, k)).collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = total - quotas.iter().sum::<usize>();
    for &(_, k) in &rema {
        if left == 0 {
            break;
        }
        if quotas[k] < sizes[k] {
            quotas[k] += 1;
            left -= 1;
        }
    }
    quotas
}

/// `ceil(fraction * n)` with a small tolerance for representation error.
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Gaussian blobs per class, plus pure-noise columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Samples per class; the class count is the length.
    pub per_class: Vec<usize>,
    /// Informative dimensions.
    pub dim: usize,
    /// Standard deviation of each cluster around its center; centers are
    /// standard normal.
    pub spread: f64,
    pub noise_features: usize,
    pub flip_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub const DEFAULT_SPREAD: f64 = 0.6;

    pub fn balanced(n_classes: usize, per_class: usize, seed: u64) -> Self {
        Self {
            per_class: vec![per_class; n_classes],
            dim: 20,
            spread: Self::DEFAULT_SPREAD,
            noise_features: 30,
            flip_fraction: 0.03,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_class.len() < 2 {
            return Err(Error::invalid("synthetic data needs at least 2 classes"));
        }
        if self.per_class.contains(&0) {
            return Err(Error::invalid("every class needs at least one sample"));
        }
        if self.dim + self.noise_features == 0 {
            return Err(Error::invalid("synthetic data needs at least one feature"));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::invalid(format!("spread must be positive, got {}", self.spread)));
        }
        if !(0.0..0.5).contains(&self.flip_fraction) {
            return Err(Error::invalid(format!(
                "flip fraction {} outside [0, 0.5)",
                self.flip_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenFlip {
    pub id: String,
    pub clean_label: usize,
    pub flipped_label: usize,
}

/// Ground truth written next to a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub spec: SynthSpec,
    pub hidden_flips: Vec<HiddenFlip>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub clean: Dataset,
    pub flipped: Dataset,
    pub truth: SynthTruth,
}

impl SynthOutput {
    pub fn hidden_flip_ids(&self) -> Vec<String> {
        self.truth.hidden_flips.iter().map(|f| f.id.clone()).collect()
    }
}

pub fn synth_blobs(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let n_classes = spec.per_class.len();
    let n: usize = spec.per_class.iter().sum();
    let width = spec.dim + spec.noise_features;

    let mut rng = rng_from_seed(derive_seed(spec.seed, 0));
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();

    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * width);
    for (class, &count) in spec.per_class.iter().enumerate() {
        for _ in 0..count {
            labels.push(class);
            for &c in &centers[class] {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(c + spec.spread * z);
            }
            for _ in 0..spec.noise_features {
                data.push(StandardNormal.sample(&mut rng));
            }
        }
    }
    // interleave classes so row order carries no label information
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let id_width = n.to_string().len().max(4);
    let feature_names = (0..spec.dim)
        .map(|j| format!("x{j:02}"))
        .chain((0..spec.noise_features).map(|j| format!("noise{j:02}")))
        .collect();
    let values = DMatrix::from_fn(n, width, |i, j| data[order[i] * width + j]);
    let clean_labels: Vec<usize> = order.iter().map(|&o| labels[o]).collect();
    let features = FeatureMatrix {
        sample_ids: (0..n).map(|i| format!("s{i:0id_width$}")).collect(),
        feature_names,
        values,
    };
    let clean = Dataset::new(features, clean_labels, n_classes)?;

    let mut flip_rng = rng_from_seed(derive_seed(spec.seed, 1));
    let n_flips = fraction_count(spec.flip_fraction, n);
    let mut flip_rows = sample_without_replacement(&mut flip_rng, n, n_flips);
    flip_rows.sort_unstable();
    let mut flipped_labels = clean.labels.clone();
    let mut hidden_flips = Vec::with_capacity(n_flips);
    for &r in &flip_rows {
        let new = other_label(&mut flip_rng, clean.labels[r], n_classes);
        flipped_labels[r] = new;
        hidden_flips.push(HiddenFlip {
            id: clean.ids()[r].clone(),
            clean_label: clean.labels[r],
            flipped_label: new,
        });
    }
    let flipped = clean.with_labels(flipped_labels)?;
    Ok(SynthOutput {
        clean,
        flipped,
        truth: SynthTruth {
            spec: spec.clone(),
            hidden_flips,
        },
    })
}

/// Maps sample ids to row indices.
pub fn id_index(dataset: &Dataset) -> HashMap<&str, usize> {
    dataset.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
}
