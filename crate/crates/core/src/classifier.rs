//! Elastic-net linear classifier trained by SGD (one-vs-rest logistic loss),
//! with balanced class weights and stratified k-fold selection of the
//! regularization strength.
//!
//! The L1 part of the penalty uses the cumulative-penalty scheme: every
//! weight tracks how much L1 shrinkage it has actually received and is
//! clipped at zero instead of crossing it, so weights reach exact zeros and
//! the selected feature set is well defined.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elm::argmax_rows;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Per-sample weights `n / (C * n_c)`.
pub fn balanced_class_weights(labels: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; n_classes];
    for (index, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::LabelOutOfRange {
                index,
                label: l,
                n_classes,
            });
        }
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&k| k == 0) {
        return Err(Error::EmptyClass(c));
    }
    let n = labels.len() as f64;
    let per_class: Vec<f64> = counts.iter().map(|&k| n / (n_classes as f64 * k as f64)).collect();
    Ok(labels.iter().map(|&l| per_class[l]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub folds: Vec<usize>,
    pub seed: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CvPlan {
    pub fn fold_members(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_members(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Shuffles each class and deals its members round-robin over the folds.
/// Each class starts dealing where the previous one stopped, so fold sizes
/// stay within one of each other and every class is within one of its
/// proportional share in every fold.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<CvPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} samples")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut rng = rng_from_seed(seed);
    let mut folds = vec![0; n];
    let mut warnings = Vec::new();
    let mut next = 0;
    for (class, m) in members.iter_mut().enumerate() {
        if m.is_empty() {
            continue;
        }
        if m.len() < k {
            warnings.push(format!("class {class} has {} samples, fewer than k = {k}", m.len()));
        }
        m.shuffle(&mut rng);
        for &i in m.iter() {
            folds[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(CvPlan {
        k,
        folds,
        seed,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticNetConfig {
    pub alpha_grid: Vec<f64>,
    #[serde(default = "ElasticNetConfig::default_l1_ratio")]
    pub l1_ratio: f64,
    #[serde(default = "ElasticNetConfig::default_eta0")]
    pub eta0: f64,
    #[serde(default = "ElasticNetConfig::default_epochs")]
    pub epochs: usize,
}

impl ElasticNetConfig {
    fn default_l1_ratio() -> f64 {
        0.15
    }
    fn default_eta0() -> f64 {
        0.01
    }
    fn default_epochs() -> usize {
        20
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(Error::invalid("alpha grid is empty"));
        }
        if self.alpha_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("alpha values must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::invalid(format!("l1_ratio {} outside [0, 1]", self.l1_ratio)));
        }
        if !(self.eta0 > 0.0) {
            return Err(Error::invalid("eta0 must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        Ok(())
    }
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        Self {
            alpha_grid: vec![1e-4, 1e-3, 1e-2, 1e-1],
            l1_ratio: Self::default_l1_ratio(),
            eta0: Self::default_eta0(),
            epochs: Self::default_epochs(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    LogisticOneVsRest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    /// `D x C`.
    pub weights: DMatrix<f64>,
    pub intercepts: Vec<f64>,
    pub alpha: f64,
    pub l1_ratio: f64,
    pub loss: Loss,
    /// Fraction of weights that are exactly zero.
    pub sparsity: f64,
}

impl ElasticNetModel {
    pub fn n_classes(&self) -> usize {
        self.intercepts.len()
    }

    pub fn decision_function(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.weights.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.nrows(),
                found: x.ncols(),
            });
        }
        let mut scores = x * &self.weights;
        for (c, mut col) in scores.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.intercepts[c]);
        }
        Ok(scores)
    }

    /// Argmax of the decision function, ties to the lowest class.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.decision_function(x)?))
    }
}

/// Feature indices with a nonzero weight for any class, ascending.
pub fn selected_features(model: &ElasticNetModel) -> Vec<usize> {
    (0..model.weights.nrows())
        .filter(|&j| model.weights.row(j).iter().any(|&w| w != 0.0))
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Plain SGD on the rows listed in `rows`, with a fixed alpha.
fn sgd_fit(
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    sample_weights: &[f64],
    rows: &[usize],
    alpha: f64,
    config: &ElasticNetConfig,
    seed: u64,
) -> Result<ElasticNetModel> {
    let d = x.ncols();
    let rho = config.l1_ratio;
    let eta0 = config.eta0;
    // row-major copy for cache-friendly access; w[c * d + j]
    let rows_data: Vec<Vec<f64>> = rows.iter().map(|&r| x.row(r).iter().copied().collect()).collect();
    let mut w = vec![0.0; n_classes * d];
    let mut b = vec![0.0; n_classes];
    let mut q = vec![0.0; n_classes * d];
    let mut u = 0.0;
    let mut t = 0.0f64;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = rng_from_seed(seed);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let xi = &rows_data[k];
            let yi = labels[rows[k]];
            let si = sample_weights[rows[k]];
            let eta = eta0 / (1.0 + eta0 * alpha * t);
            let decay = (1.0 - eta * alpha * (1.0 - rho)).max(0.0);
            u += eta * alpha * rho;
            for c in 0..n_classes {
                let wc = &mut w[c * d..(c + 1) * d];
                let margin: f64 = wc.iter().zip(xi).map(|(a, v)| a * v).sum::<f64>() + b[c];
                let target = if yi == c { 1.0 } else { 0.0 };
                let g = si * (sigmoid(margin) - target);
                for (a, v) in wc.iter_mut().zip(xi) {
                    *a = *a * decay - eta * g * v;
                }
                b[c] -= eta * g;
            }
            if rho > 0.0 {
                for (wj, qj) in w.iter_mut().zip(q.iter_mut()) {
                    let z = *wj;
                    if z > 0.0 {
                        *wj = (z - (u + *qj)).max(0.0);
                    } else if z < 0.0 {
                        *wj = (z + (u - *qj)).min(0.0);
                    }
                    *qj += *wj - z;
                }
            }
            t += 1.0;
        }
        if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Divergence { alpha });
        }
    }

    let zeros = w.iter().filter(|&&v| v == 0.0).count();
    Ok(ElasticNetModel {
        weights: DMatrix::from_fn(d, n_classes, |j, c| w[c * d + j]),
        intercepts: b,
        alpha,
        l1_ratio: rho,
        loss: Loss::LogisticOneVsRest,
        sparsity: if w.is_empty() { 0.0 } else { zeros as f64 / w.len() as f64 },
    })
}

/// Sample-weighted accuracy over `rows`.
pub fn weighted_accuracy(truth: &[usize], predicted: &[usize], weights: &[f64], rows: &[usize]) -> f64 {
    let (mut hit, mut total) = (0.0, 0.0);
    for (k, &r) in rows.iter().enumerate() {
        total += weights[r];
        if predicted[k] == truth[r] {
            hit += weights[r];
        }
    }
    if total > 0.0 {
        hit / total
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub alpha: f64,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetFit {
    pub model: ElasticNetModel,
    pub cv: Vec<CvRow>,
    /// Out-of-fold predictions of the selected alpha.
    pub oof_predictions: Vec<usize>,
}

impl ElasticNetFit {
    pub fn cv_csv(&self) -> String {
        let mut s = String::from("alpha,mean_score");
        let k = self.cv.first().map_or(0, |r| r.fold_scores.len());
        for f in 0..k {
            s.push_str(&format!(",fold{f}"));
        }
        s.push('\n');
        for row in &self.cv {
            s.push_str(&format!("{},{}", row.alpha, row.mean_score));
            for v in &row.fold_scores {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Cross-validates every alpha in the grid with the weighted accuracy, then
/// refits the best one on all rows. Score ties go to the larger alpha.
/// Grid points and folds run in parallel; each job has its own seed derived
/// from `seed`, so results do not depend on the thread count.
pub fn fit_elasticnet_sgd(
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    sample_weights: &[f64],
    plan: &CvPlan,
    config: &ElasticNetConfig,
    seed: u64,
) -> Result<ElasticNetFit> {
    config.validate()?;
    let n = x.nrows();
    if labels.len() != n || sample_weights.len() != n || plan.folds.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len().min(sample_weights.len()).min(plan.folds.len()),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("classifier input"));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
        return Err(Error::LabelOutOfRange {
            index,
            label,
            n_classes,
        });
    }

    let k = plan.k;
    let jobs: Vec<(usize, usize)> = (0..config.alpha_grid.len())
        .flat_map(|a| (0..k).map(move |f| (a, f)))
        .collect();
    let results: Vec<(f64, Vec<usize>, Vec<usize>)> = jobs
        .par_iter()
        .map(|&(a, f)| {
            let alpha = config.alpha_grid[a];
            let train = plan.train_members(f);
            let test = plan.fold_members(f);
            let job_seed = derive_seed(seed, (a * k + f) as u64);
            let model = sgd_fit(x, labels, n_classes, sample_weights, &train, alpha, config, job_seed)?;
            let xt = DMatrix::from_fn(test.len(), x.ncols(), |i, j| x[(test[i], j)]);
            let pred = model.predict(&xt)?;
            Ok((weighted_accuracy(labels, &pred, sample_weights, &test), test, pred))
        })
        .collect::<Result<_>>()?;

    let mut cv = Vec::with_capacity(config.alpha_grid.len());
    let mut best = 0;
    for (a, &alpha) in config.alpha_grid.iter().enumerate() {
        let fold_scores: Vec<f64> = results[a * k..(a + 1) * k].iter().map(|r| r.0).collect();
        let mean_score = fold_scores.iter().sum::<f64>() / k as f64;
        if a > 0 {
            let cur = &cv[best] as &CvRow;
            if mean_score > cur.mean_score || (mean_score == cur.mean_score && alpha > cur.alpha) {
                best = a;
            }
        }
        cv.push(CvRow {
            alpha,
            fold_scores,
            mean_score,
        });
    }

    let mut oof_predictions = vec![0; n];
    for (_, test, pred) in &results[best * k..(best + 1) * k] {
        for (&r, &p) in test.iter().zip(pred) {
            oof_predictions[r] = p;
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let refit_seed = derive_seed(seed, jobs.len() as u64);
    let model = sgd_fit(
        x,
        labels,
        n_classes,
        sample_weights,
        &all,
        config.alpha_grid[best],
        config,
        refit_seed,
    )?;
    Ok(ElasticNetFit {
        model,
        cv,
        oof_predictions,
    })
}

/// `counts[i][j]` = samples of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

pub fn confusion_matrix(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let mut counts = vec![vec![0; n_classes]; n_classes];
    for (index, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
        for label in [t, p] {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange {
                    index,
                    label,
                    n_classes,
                });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn support(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Per-class recall; `None` for classes without support.
    pub fn recall(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let s: usize = row.iter().sum();
                (s > 0).then(|| row[i] as f64 / s as f64)
            })
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let total: usize = self.support().iter().sum();
        let hit: usize = (0..self.n_classes()).map(|i| self.counts[i][i]).sum();
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }

    /// Mean recall over classes with support.
    pub fn balanced_accuracy(&self) -> f64 {
        let r: Vec<f64> = self.recall().into_iter().flatten().collect();
        if r.is_empty() {
            0.0
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let c = self.n_classes();
        let mut s = String::from("true\\predicted");
        for j in 0..c {
            s.push_str(&format!(",{j}"));
        }
        s.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            s.push_str(&i.to_string());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn table2_weights() {
        let counts = [5743usize, 20503, 2329, 668];
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &k)| vec![c; k]).collect();
        let w = balanced_class_weights(&labels, 4).unwrap();
        let n = 29243.0;
        let w1 = w[counts[0]];
        let w3 = *w.last().unwrap();
        assert!((w1 - n / (4.0 * 20503.0)).abs() < 1e-12);
        assert!((w1 - 0.3566).abs() < 1e-4);
        assert!((w3 - 10.944).abs() < 1e-3);
        let mut totals = [0.0; 4];
        for (&l, &v) in labels.iter().zip(&w) {
            totals[l] += v;
        }
        for t in totals {
            assert!((t - totals[0]).abs() <= 1e-12 * totals[0]);
        }
    }

    #[test]
    fn trivial_weights() {
        assert_eq!(balanced_class_weights(&[0, 1, 1, 0], 2).unwrap(), vec![1.0; 4]);
        assert_eq!(balanced_class_weights(&[0, 0, 0], 1).unwrap(), vec![1.0; 3]);
        assert!(matches!(balanced_class_weights(&[0, 0], 2), Err(Error::EmptyClass(1))));
    }

    #[test]
    fn kfold_exact_division() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let plan = stratified_kfold(&labels, 5, 3).unwrap();
        for f in 0..5 {
            let m = plan.fold_members(f);
            assert_eq!(m.iter().filter(|&&i| labels[i] == 0).count(), 10);
            assert_eq!(m.iter().filter(|&&i| labels[i] == 1).count(), 10);
        }
    }

    #[test]
    fn kfold_remainder_spread() {
        let labels = vec![0; 7];
        let plan = stratified_kfold(&labels, 5, 1).unwrap();
        let mut sizes: Vec<usize> = (0..5).map(|f| plan.fold_members(f).len()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
    }

    #[test]
    fn kfold_errors_and_warnings() {
        assert!(stratified_kfold(&[0, 1, 0], 1, 0).is_err());
        assert!(stratified_kfold(&[0, 1, 0], 4, 0).is_err());
        let plan = stratified_kfold(&[0, 0, 0, 0, 0, 1, 1], 3, 0).unwrap();
        assert_eq!(plan.warnings.len(), 1);
    }

    #[test]
    fn kfold_deterministic() {
        let labels: Vec<usize> = (0..57).map(|i| i % 3).collect();
        assert_eq!(stratified_kfold(&labels, 5, 9).unwrap(), stratified_kfold(&labels, 5, 9).unwrap());
    }

    #[test]
    fn confusion_basics() {
        let cm = confusion_matrix(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        let cm = confusion_matrix(&[0, 1, 2], &[1, 1, 1], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![0, 1, 0], vec![0, 1, 0], vec![0, 1, 0]]);
        assert_eq!(cm.support(), vec![1, 1, 1]);
        assert!(confusion_matrix(&[0, 3], &[0, 0], 3).is_err());
        assert!(confusion_matrix(&[0], &[0, 0], 3).is_err());
    }

    #[test]
    fn selected_features_of_toy_models() {
        let mut model = ElasticNetModel {
            weights: DMatrix::zeros(4, 2),
            intercepts: vec![0.0, 0.0],
            alpha: 1.0,
            l1_ratio: 1.0,
            loss: Loss::LogisticOneVsRest,
            sparsity: 1.0,
        };
        assert!(selected_features(&model).is_empty());
        model.weights[(2, 1)] = -0.5;
        assert_eq!(selected_features(&model), vec![2]);
    }

    #[test]
    fn positive_scaling_keeps_predictions() {
        let mut rng = rng_from_seed(1);
        let x = DMatrix::from_fn(20, 3, |_, _| StandardNormal.sample(&mut rng));
        let model = ElasticNetModel {
            weights: DMatrix::from_fn(3, 3, |_, _| StandardNormal.sample(&mut rng)),
            intercepts: vec![0.1, -0.2, 0.3],
            alpha: 1.0,
            l1_ratio: 0.5,
            loss: Loss::LogisticOneVsRest,
            sparsity: 0.0,
        };
        let mut scaled = model.clone();
        scaled.weights *= 3.7;
        scaled.intercepts.iter_mut().for_each(|b| *b *= 3.7);
        assert_eq!(model.predict(&x).unwrap(), scaled.predict(&x).unwrap());
    }

    #[test]
    fn strong_penalty_on_noise_zeroes_everything() {
        let mut rng = rng_from_seed(2);
        let n = 120;
        let x = DMatrix::from_fn(n, 10, |_, _| StandardNormal.sample(&mut rng));
        let labels: Vec<usize> = (0..n).map(|i| if i % 4 == 0 { 1 } else { 0 }).collect();
        let weights = vec![1.0; n];
        let plan = stratified_kfold(&labels, 3, 0).unwrap();
        let config = ElasticNetConfig {
            alpha_grid: vec![10.0],
            l1_ratio: 1.0,
            ..ElasticNetConfig::default()
        };
        let fit = fit_elasticnet_sgd(&x, &labels, 2, &weights, &plan, &config, 5).unwrap();
        assert!(selected_features(&fit.model).is_empty());
        assert_eq!(fit.model.sparsity, 1.0);
        assert!(fit.model.predict(&x).unwrap().iter().all(|&p| p == 0));
    }

    #[test]
    fn single_alpha_grid_refits_that_alpha() {
        let mut rng = rng_from_seed(3);
        let x = DMatrix::from_fn(40, 4, |_, _| StandardNormal.sample(&mut rng));
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let plan = stratified_kfold(&labels, 4, 0).unwrap();
        let config = ElasticNetConfig {
            alpha_grid: vec![0.05],
            ..ElasticNetConfig::default()
        };
        let fit = fit_elasticnet_sgd(&x, &labels, 2, &vec![1.0; 40], &plan, &config, 1).unwrap();
        assert_eq!(fit.model.alpha, 0.05);
        assert_eq!(fit.cv.len(), 1);
    }

    #[test]
    fn sgd_is_deterministic() {
        let mut rng = rng_from_seed(4);
        let x = DMatrix::from_fn(60, 5, |_, _| StandardNormal.sample(&mut rng));
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let plan = stratified_kfold(&labels, 3, 0).unwrap();
        let config = ElasticNetConfig::default();
        let w = vec![1.0; 60];
        let a = fit_elasticnet_sgd(&x, &labels, 3, &w, &plan, &config, 11).unwrap();
        let b = fit_elasticnet_sgd(&x, &labels, 3, &w, &plan, &config, 11).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.cv, b.cv);
    }

    #[test]
    fn divergence_is_reported() {
        let x = DMatrix::from_element(4, 1, 1e308);
        let labels = vec![0, 1, 0, 1];
        let plan = stratified_kfold(&labels, 2, 0).unwrap();
        let config = ElasticNetConfig {
            alpha_grid: vec![1e-6],
            l1_ratio: 0.0,
            eta0: 1e10,
            epochs: 3,
        };
        assert!(matches!(
            fit_elasticnet_sgd(&x, &labels, 2, &[1.0; 4], &plan, &config, 0),
            Err(Error::Divergence { .. })
        ));
    }
}
