//! Mislabel detection by label-flip trials on an ELM with closed-form
//! leave-one-out error.
//!
//! Each model injects a control group of artificial mislabels, then
//! repeatedly proposes relabeling a few samples. A proposal whose relabeling
//! strictly lowers the global LOO error adds one to the score of every
//! proposed sample. Trials are evaluated against the committed labeling and
//! never persist. A model stops once its artificial mislabels average the
//! target score (or the iteration cap is hit). Scores are averaged over an
//! ensemble of models, each with its own subsample, feature subset, hidden
//! layer and artificial set, and samples above a fitted-normal quantile are
//! reported.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{fraction_count, subsample_focus, Dataset, SubsampleMode};
use crate::elm::{make_hidden_layer, HiddenLayerConfig, Standardizer};
use crate::error::{Error, Result};
use crate::press::{Flip, PressState};
use crate::rng::{derive_seed, other_label, rng_from_seed, sample_without_replacement};
use crate::stats::{welch_t, NormalFit, WelchTest};

pub const REPORT_FORMAT: &str = "mdelm-report/1";

// Per-model RNG stream tags.
const STREAM_SUBSAMPLE: u64 = 0;
const STREAM_FEATURES: u64 = 1;
const STREAM_LAYER: u64 = 2;
const STREAM_ARTIFICIAL: u64 = 3;
const STREAM_PROPOSALS: u64 = 4;

/// Which labels decide focus-class membership when proposing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocusMode {
    /// Labels after artificial injection.
    #[default]
    Current,
    /// Labels as given in the dataset.
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub n_models: usize,
    /// Features drawn per model; `None` uses all of them.
    #[serde(default)]
    pub feature_subset_size: Option<usize>,
    pub artificial_fraction: f64,
    pub flips_per_iteration: usize,
    #[serde(default)]
    pub focus_class: Option<usize>,
    #[serde(default)]
    pub focus_mode: FocusMode,
    /// Non-focus samples drawn per model; `None` keeps the whole dataset.
    #[serde(default)]
    pub n_other: Option<usize>,
    #[serde(default)]
    pub subsample_mode: SubsampleMode,
    pub target_artificial_score: f64,
    /// Cap on proposals per model.
    pub max_iterations: u64,
    pub quantiles: Vec<f64>,
    pub lambda: f64,
    pub hidden: HiddenLayerConfig,
    pub master_seed: u64,
    /// Also fit the background normal to the artificial-control scores.
    #[serde(default)]
    pub fit_includes_artificial: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            n_models: 10,
            feature_subset_size: Some(100),
            artificial_fraction: 0.03,
            flips_per_iteration: 2,
            focus_class: Some(3),
            focus_mode: FocusMode::Current,
            n_other: Some(900),
            subsample_mode: SubsampleMode::Pooled,
            target_artificial_score: 100.0,
            max_iterations: 1_000_000,
            quantiles: vec![0.99, 0.999],
            lambda: 1.0,
            hidden: HiddenLayerConfig::default(),
            master_seed: 0,
            fit_includes_artificial: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_models == 0 {
            return Err(Error::invalid("n_models must be at least 1"));
        }
        if !(self.artificial_fraction > 0.0 && self.artificial_fraction < 0.5) {
            return Err(Error::invalid(format!(
                "artificial_fraction {} outside (0, 0.5)",
                self.artificial_fraction
            )));
        }
        if self.flips_per_iteration == 0 {
            return Err(Error::invalid("flips_per_iteration must be at least 1"));
        }
        if self.feature_subset_size == Some(0) {
            return Err(Error::invalid("feature_subset_size must be at least 1"));
        }
        if self.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(Error::invalid("quantiles must lie in (0, 1)"));
        }
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("quantiles must be strictly ascending"));
        }
        if !(self.target_artificial_score >= 0.0 && self.target_artificial_score.is_finite()) {
            return Err(Error::invalid("target_artificial_score must be finite and non-negative"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if self.n_other.is_some() && self.focus_class.is_none() {
            return Err(Error::invalid("n_other requires a focus_class"));
        }
        self.hidden.validate()
    }
}

/// Labels after artificial injection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub labels: Vec<usize>,
    /// Injected rows, ascending.
    pub indices: Vec<usize>,
    /// Labels of `indices` before injection.
    pub original: Vec<usize>,
}

/// Relabels `ceil(fraction * n)` uniformly chosen samples to a uniformly
/// chosen different class.
pub fn inject_artificial(labels: &[usize], fraction: f64, n_classes: usize, seed: u64) -> Result<Injection> {
    if n_classes < 2 {
        return Err(Error::invalid("artificial mislabels need at least 2 classes"));
    }
    let n = labels.len();
    let count = fraction_count(fraction, n);
    if fraction * (n as f64) < 1.0 - 1e-9 {
        return Err(Error::invalid(format!(
            "fraction {fraction} of {n} samples selects no artificial mislabels"
        )));
    }
    if count > n {
        return Err(Error::invalid(format!("fraction {fraction} exceeds the sample count")));
    }
    let mut rng = rng_from_seed(seed);
    let mut indices = sample_without_replacement(&mut rng, n, count);
    indices.sort_unstable();
    let mut out = labels.to_vec();
    let mut original = Vec::with_capacity(count);
    for &i in &indices {
        original.push(labels[i]);
        out[i] = other_label(&mut rng, labels[i], n_classes);
    }
    Ok(Injection {
        labels: out,
        indices,
        original,
    })
}

/// Sample indices with their proposed new labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub flips: Vec<(usize, usize)>,
}

/// One model's trial loop: a fixed PRESS state plus running scores.
#[derive(Debug)]
pub struct TrialState {
    press: PressState,
    labels: Vec<usize>,
    original_labels: Vec<usize>,
    n_classes: usize,
    scores: Vec<u32>,
}

impl TrialState {
    /// `labels` is the committed labeling (after injection);
    /// `original_labels` the labeling before injection.
    pub fn new(press: PressState, labels: Vec<usize>, original_labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let n = press.n_samples();
        if labels.len() != n || original_labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        if n_classes < 2 {
            return Err(Error::invalid("trials need at least 2 classes"));
        }
        Ok(Self {
            press,
            labels,
            original_labels,
            n_classes,
            scores: vec![0; n],
        })
    }

    pub fn press(&self) -> &PressState {
        &self.press
    }

    pub fn scores(&self) -> &[u32] {
        &self.scores
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `flips_per_iteration` distinct samples, each with a different label.
    /// With a focus class the first sample comes from that class.
    pub fn propose<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
        flips_per_iteration: usize,
        focus: Option<(usize, FocusMode)>,
    ) -> Result<Proposal> {
        let n = self.labels.len();
        if flips_per_iteration > n {
            return Err(Error::invalid(format!(
                "{flips_per_iteration} flips requested from {n} samples"
            )));
        }
        let picks = match focus {
            Some((class, mode)) => {
                let source = match mode {
                    FocusMode::Current => &self.labels,
                    FocusMode::Original => &self.original_labels,
                };
                let pool: Vec<usize> = (0..n).filter(|&i| source[i] == class).collect();
                if pool.is_empty() {
                    return Err(Error::EmptyClass(class));
                }
                let first = pool[rng.random_range(0..pool.len())];
                let mut picks = vec![first];
                picks.extend(
                    sample_without_replacement(rng, n - 1, flips_per_iteration - 1)
                        .into_iter()
                        .map(|k| if k >= first { k + 1 } else { k }),
                );
                picks
            }
            None => sample_without_replacement(rng, n, flips_per_iteration),
        };
        Ok(Proposal {
            flips: picks
                .into_iter()
                .map(|i| (i, other_label(rng, self.labels[i], self.n_classes)))
                .collect(),
        })
    }

    /// Evaluates the proposal against the committed labeling. On a strict
    /// LOO-error decrease every proposed sample gains one point.
    pub fn trial(&mut self, proposal: &Proposal) -> Result<bool> {
        let flips: Vec<Flip> = proposal
            .flips
            .iter()
            .map(|&(i, l)| {
                if l >= self.n_classes {
                    return Err(Error::LabelOutOfRange {
                        index: i,
                        label: l,
                        n_classes: self.n_classes,
                    });
                }
                Ok(Flip::to_label(i, l, self.n_classes))
            })
            .collect::<Result<_>>()?;
        let after = self.press.loo_error_after_flip(&flips)?;
        let accepted = after < self.press.loo_error();
        if accepted {
            for &(i, _) in &proposal.flips {
                self.scores[i] += 1;
            }
        }
        Ok(accepted)
    }
}

/// Outcome of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub model_index: usize,
    pub seed: u64,
    /// Participating samples, in dataset order.
    pub sample_ids: Vec<String>,
    pub feature_subset: Vec<usize>,
    pub artificial_ids: Vec<String>,
    /// Aligned with `sample_ids`.
    pub scores: Vec<u32>,
    pub iterations: u64,
    pub accepted_trials: u64,
    pub final_artificial_mean: f64,
    pub initial_loo_error: f64,
}

impl ModelRun {
    pub fn artificial_scores(&self) -> Vec<f64> {
        let artificial: std::collections::HashSet<&str> = self.artificial_ids.iter().map(String::as_str).collect();
        self.sample_ids
            .iter()
            .zip(&self.scores)
            .filter(|(id, _)| artificial.contains(id.as_str()))
            .map(|(_, &s)| f64::from(s))
            .collect()
    }
}

/// Runs one model on `dataset` (already subsampled).
pub fn run_model(dataset: &Dataset, config: &DetectorConfig, model_index: usize, model_seed: u64) -> Result<ModelRun> {
    config.validate()?;
    let n_features = dataset.n_features();
    let subset_size = config.feature_subset_size.unwrap_or(n_features);
    if subset_size > n_features {
        return Err(Error::invalid(format!(
            "feature subset of {subset_size} requested from {n_features} features"
        )));
    }
    let mut feature_subset = if subset_size == n_features {
        (0..n_features).collect()
    } else {
        let mut rng = rng_from_seed(derive_seed(model_seed, STREAM_FEATURES));
        sample_without_replacement(&mut rng, n_features, subset_size)
    };
    feature_subset.sort_unstable();

    let injection = inject_artificial(
        &dataset.labels,
        config.artificial_fraction,
        dataset.n_classes,
        derive_seed(model_seed, STREAM_ARTIFICIAL),
    )?;
    let artificial_ids: Vec<String> = injection.indices.iter().map(|&i| dataset.ids()[i].clone()).collect();
    let n = dataset.n_samples();

    let mut run = ModelRun {
        model_index,
        seed: model_seed,
        sample_ids: dataset.ids().to_vec(),
        feature_subset,
        artificial_ids,
        scores: vec![0; n],
        iterations: 0,
        accepted_trials: 0,
        final_artificial_mean: 0.0,
        initial_loo_error: f64::NAN,
    };
    if config.target_artificial_score <= 0.0 {
        return Ok(run);
    }

    let sub = dataset.select_columns(&run.feature_subset)?;
    let x = Standardizer::fit(sub.x()).transform(sub.x())?;
    let layer = make_hidden_layer(
        x.ncols(),
        &config.hidden,
        derive_seed(model_seed, STREAM_LAYER),
        Some(&x),
    )?;
    let h = layer.transform(&x)?;
    let press = PressState::from_labels(&h, &injection.labels, dataset.n_classes, config.lambda)?;
    run.initial_loo_error = press.loo_error();

    let mut state = TrialState::new(press, injection.labels.clone(), dataset.labels.clone(), dataset.n_classes)?;
    let mut is_artificial = vec![false; n];
    for &i in &injection.indices {
        is_artificial[i] = true;
    }
    let n_artificial = injection.indices.len() as f64;
    let target_total = config.target_artificial_score * n_artificial;
    let focus = config.focus_class.map(|c| (c, config.focus_mode));
    let mut rng = rng_from_seed(derive_seed(model_seed, STREAM_PROPOSALS));
    let mut artificial_total = 0.0;

    while run.iterations < config.max_iterations && artificial_total < target_total {
        let proposal = state.propose(&mut rng, config.flips_per_iteration, focus)?;
        run.iterations += 1;
        if state.trial(&proposal)? {
            run.accepted_trials += 1;
            artificial_total += proposal.flips.iter().filter(|(i, _)| is_artificial[*i]).count() as f64;
        }
    }
    run.scores = state.scores().to_vec();
    run.final_artificial_mean = artificial_total / n_artificial;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileThreshold {
    pub quantile: f64,
    /// `None` when the background scores have no spread.
    pub threshold: Option<f64>,
    /// Sorted by score descending, then id.
    pub detected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_index: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub feature_subset: Vec<usize>,
    pub artificial_ids: Vec<String>,
    pub iterations: u64,
    pub accepted_trials: u64,
    pub final_artificial_mean: f64,
    pub initial_loo_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub format: String,
    pub sample_ids: Vec<String>,
    pub labels: Vec<usize>,
    /// Mean over the models where the sample took part and was not an
    /// artificial mislabel.
    pub mean_scores: Vec<Option<f64>>,
    /// `model_scores[m][i]`: score of sample `i` in model `m`, if it took part.
    pub model_scores: Vec<Vec<Option<u32>>>,
    /// `artificial[m][i]`: sample `i` was an artificial mislabel in model `m`.
    pub artificial: Vec<Vec<bool>>,
    pub models: Vec<ModelSummary>,
    /// Mean over models of the final artificial average.
    pub artificial_mean: f64,
    pub background: Option<NormalFit>,
    pub thresholds: Vec<QuantileThreshold>,
    /// Artificial-control scores against background mean scores.
    pub welch: Option<WelchTest>,
    pub focus_class: Option<usize>,
    pub warnings: Vec<String>,
    pub config: DetectorConfig,
}

impl ScoreReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(s)?;
        if report.format != REPORT_FORMAT {
            return Err(Error::invalid(format!("unsupported report format `{}`", report.format)));
        }
        Ok(report)
    }

    /// Pooled per-model scores of the artificial mislabels.
    pub fn artificial_scores(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (scores, flags) in self.model_scores.iter().zip(&self.artificial) {
            for (s, &a) in scores.iter().zip(flags) {
                if let (Some(s), true) = (s, a) {
                    out.push(f64::from(*s));
                }
            }
        }
        out
    }

    /// Mean scores of samples that have one.
    pub fn background_scores(&self) -> Vec<f64> {
        self.mean_scores.iter().flatten().copied().collect()
    }

    /// Flat CSV: id, label, mean score, per-model scores (empty when the
    /// sample did not take part), artificial count and one detected flag per
    /// quantile.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string(), "label".into(), "mean_score".into()];
        header.extend((0..self.model_scores.len()).map(|m| format!("model{m}")));
        header.push("artificial_in".into());
        header.extend(self.thresholds.iter().map(|t| format!("detected_q{}", t.quantile)));
        w.write_record(&header)?;
        let detected: Vec<std::collections::HashSet<&str>> = self
            .thresholds
            .iter()
            .map(|t| t.detected.iter().map(String::as_str).collect())
            .collect();
        for (i, id) in self.sample_ids.iter().enumerate() {
            let mut row = vec![
                id.clone(),
                self.labels[i].to_string(),
                self.mean_scores[i].map(|v| v.to_string()).unwrap_or_default(),
            ];
            row.extend(
                self.model_scores
                    .iter()
                    .map(|m| m[i].map(|s| s.to_string()).unwrap_or_default()),
            );
            row.push(self.artificial.iter().filter(|a| a[i]).count().to_string());
            row.extend(detected.iter().map(|d| u8::from(d.contains(id.as_str())).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Detected ids at `quantile`.
pub fn detect(report: &ScoreReport, quantile: f64) -> Result<Vec<String>> {
    report
        .thresholds
        .iter()
        .find(|t| (t.quantile - quantile).abs() < 1e-12)
        .map(|t| t.detected.clone())
        .ok_or(Error::UnknownQuantile(quantile))
}

/// Runs `config.n_models` models on up to `jobs` threads. The result does
/// not depend on `jobs`: model `m` uses seed `derive_seed(master_seed, m)`
/// and aggregation happens after all models finish, in model order.
pub fn run_ensemble(dataset: &Dataset, config: &DetectorConfig, jobs: usize) -> Result<ScoreReport> {
    config.validate()?;
    if let Some(f) = config.focus_class {
        if f >= dataset.n_classes {
            return Err(Error::invalid(format!(
                "focus class {f} out of range for {} classes",
                dataset.n_classes
            )));
        }
    }
    let one = |m: usize| -> Result<ModelRun> {
        let seed = derive_seed(config.master_seed, m as u64);
        let data = match (config.focus_class, config.n_other) {
            (Some(focus), Some(n_other)) => subsample_focus(
                dataset,
                focus,
                n_other,
                derive_seed(seed, STREAM_SUBSAMPLE),
                config.subsample_mode,
            )?,
            _ => dataset.clone(),
        };
        run_model(&data, config, m, seed)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let results: Vec<Result<ModelRun>> = pool.install(|| (0..config.n_models).into_par_iter().map(one).collect());
    let mut runs = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        runs.push(r.map_err(|e| Error::ModelFailed {
            index,
            source: Box::new(e),
        })?);
    }
    assemble_report(dataset, config, runs)
}

fn assemble_report(dataset: &Dataset, config: &DetectorConfig, runs: Vec<ModelRun>) -> Result<ScoreReport> {
    let n = dataset.n_samples();
    let index = crate::datasets::id_index(dataset);
    let mut model_scores = vec![vec![None; n]; runs.len()];
    let mut artificial = vec![vec![false; n]; runs.len()];
    for (m, run) in runs.iter().enumerate() {
        for (id, &s) in run.sample_ids.iter().zip(&run.scores) {
            model_scores[m][index[id.as_str()]] = Some(s);
        }
        for id in &run.artificial_ids {
            artificial[m][index[id.as_str()]] = true;
        }
    }
    let mean_scores: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let vals: Vec<f64> = (0..runs.len())
                .filter(|&m| !artificial[m][i])
                .filter_map(|m| model_scores[m][i].map(f64::from))
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();

    let mut report = ScoreReport {
        format: REPORT_FORMAT.to_string(),
        sample_ids: dataset.ids().to_vec(),
        labels: dataset.labels.clone(),
        mean_scores,
        model_scores,
        artificial,
        artificial_mean: runs.iter().map(|r| r.final_artificial_mean).sum::<f64>() / runs.len() as f64,
        models: runs
            .iter()
            .map(|r| ModelSummary {
                model_index: r.model_index,
                seed: r.seed,
                n_samples: r.sample_ids.len(),
                feature_subset: r.feature_subset.clone(),
                artificial_ids: r.artificial_ids.clone(),
                iterations: r.iterations,
                accepted_trials: r.accepted_trials,
                final_artificial_mean: r.final_artificial_mean,
                initial_loo_error: r.initial_loo_error.is_finite().then_some(r.initial_loo_error),
            })
            .collect(),
        background: None,
        thresholds: Vec::new(),
        welch: None,
        focus_class: config.focus_class,
        warnings: Vec::new(),
        config: config.clone(),
    };

    let background = report.background_scores();
    let controls = report.artificial_scores();
    let mut fit_scores = background.clone();
    if config.fit_includes_artificial {
        fit_scores.extend(&controls);
    }
    match NormalFit::fit(&fit_scores) {
        Ok(fit) => report.background = Some(fit),
        Err(e) => report.warnings.push(format!("normal fit skipped: {e}")),
    }
    match welch_t(&controls, &background) {
        Ok(w) => report.welch = Some(w),
        Err(e) => report.warnings.push(format!("welch test skipped: {e}")),
    }

    for &q in &config.quantiles {
        let threshold = report.background.map(|f| f.threshold(q)).transpose()?;
        let detected = match threshold {
            Some(thr) => {
                let mut hits: Vec<(f64, &String)> = (0..n)
                    .filter(|&i| config.focus_class.is_none_or(|c| report.labels[i] == c))
                    .filter_map(|i| report.mean_scores[i].map(|s| (s, &report.sample_ids[i])))
                    .filter(|(s, _)| *s > thr)
                    .collect();
                hits.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
                hits.into_iter().map(|(_, id)| id.clone()).collect()
            }
            None => Vec::new(),
        };
        report.thresholds.push(QuantileThreshold {
            quantile: q,
            threshold,
            detected,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::FeatureMatrix;
    use crate::rng::rng_from_seed;
    use nalgebra::DMatrix;
    use rand_distr::{Distribution, StandardNormal};

    fn toy_state(n: usize, n_classes: usize, seed: u64) -> TrialState {
        let mut rng = rng_from_seed(seed);
        let h = DMatrix::from_fn(n, 6, |_, _| StandardNormal.sample(&mut rng));
        let labels: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
        let press = PressState::from_labels(&h, &labels, n_classes, 1.0).unwrap();
        TrialState::new(press, labels.clone(), labels, n_classes).unwrap()
    }

    #[test]
    fn injection_counts_and_changes() {
        let labels: Vec<usize> = (0..1568).map(|i| i % 4).collect();
        let inj = inject_artificial(&labels, 0.03, 4, 1).unwrap();
        assert_eq!(inj.indices.len(), 48);
        for (&i, &orig) in inj.indices.iter().zip(&inj.original) {
            assert_eq!(labels[i], orig);
            assert_ne!(inj.labels[i], orig);
        }
        let changed = (0..1568).filter(|&i| inj.labels[i] != labels[i]).count();
        assert_eq!(changed, 48);
        assert_eq!(inj, inject_artificial(&labels, 0.03, 4, 1).unwrap());
    }

    #[test]
    fn injection_single_and_errors() {
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        assert_eq!(inject_artificial(&labels, 0.1, 2, 0).unwrap().indices.len(), 1);
        assert!(inject_artificial(&labels, 0.01, 2, 0).is_err());
        assert!(inject_artificial(&[0, 0], 0.4, 1, 0).is_err());
    }

    #[test]
    fn focus_proposals() {
        let state = toy_state(40, 4, 1);
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            let p = state.propose(&mut rng, 2, Some((3, FocusMode::Current))).unwrap();
            assert_eq!(p.flips.len(), 2);
            assert_eq!(state.labels()[p.flips[0].0], 3);
            assert_ne!(p.flips[0].0, p.flips[1].0);
            for &(i, l) in &p.flips {
                assert_ne!(state.labels()[i], l);
            }
        }
        let p = state.propose(&mut rng, 1, None).unwrap();
        assert_eq!(p.flips.len(), 1);
    }

    #[test]
    fn proposals_are_distinct() {
        let state = toy_state(12, 3, 3);
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let p = state.propose(&mut rng, 5, None).unwrap();
            let mut idx: Vec<usize> = p.flips.iter().map(|f| f.0).collect();
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 5);
        }
    }

    #[test]
    fn empty_focus_class() {
        let state = toy_state(12, 3, 3);
        let mut rng = rng_from_seed(4);
        assert!(matches!(
            state.propose(&mut rng, 2, Some((5, FocusMode::Current))),
            Err(Error::EmptyClass(5))
        ));
    }

    #[test]
    fn identity_relabel_never_accepted() {
        let mut state = toy_state(30, 3, 5);
        let p = Proposal {
            flips: vec![(4, state.labels()[4]), (9, state.labels()[9])],
        };
        assert!(!state.trial(&p).unwrap());
        assert!(state.scores().iter().all(|&s| s == 0));
    }

    #[test]
    fn trials_never_change_committed_targets() {
        let mut state = toy_state(30, 3, 6);
        let before = state.press().targets().clone();
        let loo = state.press().loo_error();
        let mut rng = rng_from_seed(7);
        let mut accepted = 0;
        for _ in 0..300 {
            let p = state.propose(&mut rng, 2, None).unwrap();
            let prev = state.scores().to_vec();
            if state.trial(&p).unwrap() {
                accepted += 1;
                for &(i, _) in &p.flips {
                    assert_eq!(state.scores()[i], prev[i] + 1);
                }
            } else {
                assert_eq!(state.scores(), &prev[..]);
            }
        }
        assert!(accepted > 0);
        assert_eq!(state.press().targets(), &before);
        assert_eq!(state.press().loo_error(), loo);
    }

    fn small_dataset() -> Dataset {
        let mut rng = rng_from_seed(8);
        let n = 80;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let values = DMatrix::from_fn(n, 5, |i, j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if j == 0 {
                3.0 * labels[i] as f64 + z
            } else {
                z
            }
        });
        Dataset::new(
            FeatureMatrix {
                sample_ids: (0..n).map(|i| format!("r{i:03}")).collect(),
                feature_names: (0..5).map(|j| format!("f{j}")).collect(),
                values,
            },
            labels,
            2,
        )
        .unwrap()
    }

    fn small_config() -> DetectorConfig {
        DetectorConfig {
            n_models: 2,
            feature_subset_size: Some(4),
            artificial_fraction: 0.05,
            flips_per_iteration: 1,
            focus_class: None,
            n_other: None,
            target_artificial_score: 5.0,
            max_iterations: 5_000,
            quantiles: vec![0.9, 0.99],
            hidden: HiddenLayerConfig {
                n_sigmoid: 10,
                n_rbf: 10,
                ..HiddenLayerConfig::default()
            },
            master_seed: 3,
            ..DetectorConfig::default()
        }
    }

    #[test]
    fn zero_target_returns_immediately() {
        let d = small_dataset();
        let config = DetectorConfig {
            target_artificial_score: 0.0,
            ..small_config()
        };
        let run = run_model(&d, &config, 0, 1).unwrap();
        assert_eq!(run.iterations, 0);
        assert!(run.scores.iter().all(|&s| s == 0));
        let report = run_ensemble(&d, &config, 1).unwrap();
        assert!(report.background.is_none());
        assert!(report.thresholds.iter().all(|t| t.detected.is_empty()));
    }

    #[test]
    fn scores_grow_with_iteration_cap() {
        let d = small_dataset();
        let config = DetectorConfig {
            target_artificial_score: 1e9,
            max_iterations: 300,
            ..small_config()
        };
        let short = run_model(&d, &config, 0, 11).unwrap();
        let long = run_model(&d, &DetectorConfig { max_iterations: 900, ..config }, 0, 11).unwrap();
        assert_eq!(short.iterations, 300);
        assert!(short.scores.iter().zip(&long.scores).all(|(a, b)| a <= b));
    }

    #[test]
    fn stop_rule_reaches_target() {
        let d = small_dataset();
        let run = run_model(&d, &small_config(), 0, 5).unwrap();
        assert!(run.final_artificial_mean >= 5.0);
        assert!(run.iterations < 5_000);
        let art = run.artificial_scores();
        assert!((art.iter().sum::<f64>() / art.len() as f64 - run.final_artificial_mean).abs() < 1e-12);
    }

    #[test]
    fn single_model_average_equals_model_scores() {
        let d = small_dataset();
        let config = DetectorConfig {
            n_models: 1,
            ..small_config()
        };
        let report = run_ensemble(&d, &config, 1).unwrap();
        for i in 0..d.n_samples() {
            let s = report.model_scores[0][i].unwrap();
            if report.artificial[0][i] {
                assert_eq!(report.mean_scores[i], None);
            } else {
                assert_eq!(report.mean_scores[i], Some(f64::from(s)));
            }
        }
    }

    #[test]
    fn detection_nesting_and_order() {
        let d = small_dataset();
        let report = run_ensemble(&d, &small_config(), 2).unwrap();
        let lo = detect(&report, 0.9).unwrap();
        let hi = detect(&report, 0.99).unwrap();
        assert!(hi.iter().all(|id| lo.contains(id)));
        let index = crate::datasets::id_index(&d);
        let scores: Vec<f64> = lo.iter().map(|id| report.mean_scores[index[id.as_str()]].unwrap()).collect();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
        assert!(matches!(detect(&report, 0.95), Err(Error::UnknownQuantile(_))));
    }

    #[test]
    fn jobs_do_not_change_results() {
        let d = small_dataset();
        let a = run_ensemble(&d, &small_config(), 1).unwrap();
        let b = run_ensemble(&d, &small_config(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let ok = small_config();
        assert!(ok.validate().is_ok());
        for bad in [
            DetectorConfig { n_models: 0, ..ok.clone() },
            DetectorConfig { artificial_fraction: 0.5, ..ok.clone() },
            DetectorConfig { flips_per_iteration: 0, ..ok.clone() },
            DetectorConfig { quantiles: vec![0.99, 0.9], ..ok.clone() },
            DetectorConfig { lambda: 0.0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn report_json_round_trip() {
        let d = small_dataset();
        let report = run_ensemble(&d, &small_config(), 1).unwrap();
        let back = ScoreReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }
}
