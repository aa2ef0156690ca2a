//! Extreme Learning Machine: a fixed random hidden layer (sigmoid-type and
//! RBF neurons, optionally concatenated with the raw inputs) followed by a
//! ridge-regression readout on one-hot targets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, sample_without_replacement};

/// Per-column affine scaling to zero mean and unit variance. Binary columns
/// (values only in `{0, 1}`) pass through unchanged; constant columns are
/// only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let (mut means, mut scales) = (Vec::with_capacity(x.ncols()), Vec::with_capacity(x.ncols()));
        for col in x.column_iter() {
            let binary = col.iter().all(|&v| v == 0.0 || v == 1.0);
            if binary || x.nrows() == 0 {
                means.push(0.0);
                scales.push(1.0);
                continue;
            }
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            means.push(m);
            scales.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { means, scales }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            scales: vec![1.0; dim],
        }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.means[j]) / self.scales[j]
        }))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Hyperbolic tangent, range (-1, 1).
    #[default]
    Tanh,
    /// Logistic sigmoid, range (0, 1).
    Logistic,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayerConfig {
    pub n_sigmoid: usize,
    pub n_rbf: usize,
    pub passthrough: bool,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for HiddenLayerConfig {
    fn default() -> Self {
        Self {
            n_sigmoid: 200,
            n_rbf: 200,
            passthrough: true,
            activation: Activation::Tanh,
        }
    }
}

impl HiddenLayerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sigmoid == 0 && self.n_rbf == 0 && !self.passthrough {
            return Err(Error::invalid(
                "hidden layer needs sigmoid or RBF neurons, or passthrough",
            ));
        }
        Ok(())
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        (if self.passthrough { input_dim } else { 0 }) + self.n_sigmoid + self.n_rbf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    pub input_dim: usize,
    pub activation: Activation,
    /// `n_sigmoid x input_dim`.
    pub sigmoid_weights: DMatrix<f64>,
    pub sigmoid_biases: DVector<f64>,
    /// `n_rbf x input_dim`.
    pub rbf_centers: DMatrix<f64>,
    pub rbf_widths: DVector<f64>,
    pub passthrough: bool,
    pub seed: u64,
}

/// Median of pairwise Euclidean distances between rows; 1.0 when undefined
/// or zero.
fn median_pairwise_distance(centers: &DMatrix<f64>) -> f64 {
    let k = centers.nrows();
    let mut dists = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let d2: f64 = centers
                .row(a)
                .iter()
                .zip(centers.row(b).iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Draws a hidden layer. Sigmoid weights and biases are uniform on (-1, 1).
/// RBF centers are distinct rows of `center_source`, or uniform on the box
/// `[-1, 1]^input_dim` (the standardized data scale) when no source is given.
/// All RBF neurons share one width, the median pairwise center distance.
pub fn make_hidden_layer(
    input_dim: usize,
    config: &HiddenLayerConfig,
    seed: u64,
    center_source: Option<&DMatrix<f64>>,
) -> Result<HiddenLayer> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::invalid("input_dim must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let (n_sig, n_rbf) = (config.n_sigmoid, config.n_rbf);

    let sigmoid_weights = DMatrix::from_row_iterator(
        n_sig,
        input_dim,
        (0..n_sig * input_dim).map(|_| rng.random_range(-1.0..1.0)),
    );
    let sigmoid_biases = DVector::from_iterator(n_sig, (0..n_sig).map(|_| rng.random_range(-1.0..1.0)));

    let rbf_centers = match center_source {
        Some(src) => {
            if src.ncols() != input_dim {
                return Err(Error::DimensionMismatch {
                    expected: input_dim,
                    found: src.ncols(),
                });
            }
            if n_rbf > src.nrows() {
                return Err(Error::invalid(format!(
                    "{n_rbf} RBF neurons requested but only {} candidate centers",
                    src.nrows()
                )));
            }
            let rows = sample_without_replacement(&mut rng, src.nrows(), n_rbf);
            DMatrix::from_fn(n_rbf, input_dim, |i, j| src[(rows[i], j)])
        }
        None => DMatrix::from_row_iterator(
            n_rbf,
            input_dim,
            (0..n_rbf * input_dim).map(|_| rng.random_range(-1.0..1.0)),
        ),
    };
    let width = median_pairwise_distance(&rbf_centers);

    Ok(HiddenLayer {
        input_dim,
        activation: config.activation,
        sigmoid_weights,
        sigmoid_biases,
        rbf_widths: DVector::from_element(n_rbf, width),
        rbf_centers,
        passthrough: config.passthrough,
        seed,
    })
}

impl HiddenLayer {
    pub fn n_sigmoid(&self) -> usize {
        self.sigmoid_weights.nrows()
    }

    pub fn n_rbf(&self) -> usize {
        self.rbf_centers.nrows()
    }

    pub fn output_dim(&self) -> usize {
        (if self.passthrough { self.input_dim } else { 0 }) + self.n_sigmoid() + self.n_rbf()
    }

    /// `[X | act(X W^T + b) | exp(-|x - c|^2 / (2 sigma^2))]`.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hidden layer input"));
        }
        let n = x.nrows();
        let (n_sig, n_rbf) = (self.n_sigmoid(), self.n_rbf());
        let offset_sig = if self.passthrough { self.input_dim } else { 0 };
        let offset_rbf = offset_sig + n_sig;
        let mut h = DMatrix::zeros(n, self.output_dim());

        if self.passthrough {
            h.columns_mut(0, self.input_dim).copy_from(x);
        }
        if n_sig > 0 {
            let z = x * self.sigmoid_weights.transpose();
            for j in 0..n_sig {
                let b = self.sigmoid_biases[j];
                for i in 0..n {
                    h[(i, offset_sig + j)] = self.activation.apply(z[(i, j)] + b);
                }
            }
        }
        for k in 0..n_rbf {
            let c = self.rbf_centers.row(k);
            let denom = 2.0 * self.rbf_widths[k] * self.rbf_widths[k];
            for i in 0..n {
                let d2: f64 = x.row(i).iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                h[(i, offset_rbf + k)] = (-d2 / denom).exp();
            }
        }
        Ok(h)
    }
}

/// `n x n_classes` indicator matrix.
pub fn one_hot_targets(labels: &[usize], n_classes: usize) -> Result<DMatrix<f64>> {
    if n_classes == 0 {
        return Err(Error::invalid("n_classes must be positive"));
    }
    let mut t = DMatrix::zeros(labels.len(), n_classes);
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::LabelOutOfRange {
                index: i,
                label: l,
                n_classes,
            });
        }
        t[(i, l)] = 1.0;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeSolution {
    /// `D_h x C`.
    pub output_weights: DMatrix<f64>,
    pub lambda: f64,
    pub n_classes: usize,
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    Ok(())
}

/// `(H^T H + lambda I)^-1 H^T T` via Cholesky.
pub fn solve_ridge(h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<RidgeSolution> {
    check_lambda(lambda)?;
    if h.nrows() != t.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: t.nrows(),
        });
    }
    if h.iter().chain(t.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge inputs"));
    }
    let mut gram = h.tr_mul(h);
    for d in 0..gram.nrows() {
        gram[(d, d)] += lambda;
    }
    let chol = gram.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let output_weights = chol.solve(&h.tr_mul(t));
    if output_weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge solution"));
    }
    Ok(RidgeSolution {
        output_weights,
        lambda,
        n_classes: t.ncols(),
    })
}

/// Row-wise argmax; ties resolve to the lowest column.
pub fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn predict(layer: &HiddenLayer, solution: &RidgeSolution, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    let h = layer.transform(x)?;
    if h.ncols() != solution.output_weights.nrows() {
        return Err(Error::DimensionMismatch {
            expected: solution.output_weights.nrows(),
            found: h.ncols(),
        });
    }
    Ok(argmax_rows(&(h * &solution.output_weights)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn cfg(n_sigmoid: usize, n_rbf: usize, passthrough: bool) -> HiddenLayerConfig {
        HiddenLayerConfig {
            n_sigmoid,
            n_rbf,
            passthrough,
            activation: Activation::Tanh,
        }
    }

    #[test]
    fn layer_width() {
        let src = random_matrix(500, 12, 1);
        let layer = make_hidden_layer(12, &cfg(200, 200, true), 5, Some(&src)).unwrap();
        assert_eq!(layer.output_dim(), 12 + 400);
        let h = layer.transform(&src.rows(0, 10).into_owned()).unwrap();
        assert_eq!(h.shape(), (10, 412));
    }

    #[test]
    fn passthrough_only_is_identity() {
        let x = random_matrix(7, 4, 2);
        let layer = make_hidden_layer(4, &cfg(0, 0, true), 0, None).unwrap();
        assert_eq!(layer.transform(&x).unwrap(), x);
    }

    #[test]
    fn same_seed_same_layer() {
        let src = random_matrix(50, 6, 3);
        let a = make_hidden_layer(6, &cfg(10, 5, true), 77, Some(&src)).unwrap();
        let b = make_hidden_layer(6, &cfg(10, 5, true), 77, Some(&src)).unwrap();
        assert_eq!(a, b);
        let c = make_hidden_layer(6, &cfg(10, 5, true), 78, Some(&src)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn layer_errors() {
        let src = random_matrix(3, 2, 3);
        assert!(make_hidden_layer(2, &cfg(0, 4, false), 0, Some(&src)).is_err());
        assert!(make_hidden_layer(2, &cfg(0, 0, false), 0, None).is_err());
        let layer = make_hidden_layer(2, &cfg(3, 0, false), 0, None).unwrap();
        assert!(matches!(
            layer.transform(&DMatrix::zeros(1, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rbf_at_center_is_one_and_zero_sigmoid_is_zero() {
        let src = random_matrix(20, 3, 4);
        let mut layer = make_hidden_layer(3, &cfg(1, 1, false), 9, Some(&src)).unwrap();
        layer.sigmoid_weights.fill(0.0);
        layer.sigmoid_biases.fill(0.0);
        let x = layer.rbf_centers.clone();
        let h = layer.transform(&x).unwrap();
        assert_eq!(h[(0, 0)], 0.0);
        assert_eq!(h[(0, 1)], 1.0);
    }

    #[test]
    fn transform_bounds_and_row_independence() {
        let src = random_matrix(60, 8, 5);
        let layer = make_hidden_layer(8, &cfg(30, 20, true), 1, Some(&src)).unwrap();
        let x = random_matrix(10, 8, 6);
        let h = layer.transform(&x).unwrap();
        for i in 0..10 {
            for j in 8..38 {
                assert!(h[(i, j)].abs() <= 1.0);
                // direct evaluation of the tanh neuron
                let z: f64 = (0..8).map(|d| x[(i, d)] * layer.sigmoid_weights[(j - 8, d)]).sum::<f64>()
                    + layer.sigmoid_biases[j - 8];
                assert!((h[(i, j)] - z.tanh()).abs() < 1e-12);
            }
            for j in 38..58 {
                assert!(h[(i, j)] > 0.0 && h[(i, j)] <= 1.0);
            }
        }
        let perm: Vec<usize> = vec![3, 1, 4, 0, 9, 2, 6, 5, 8, 7];
        let xp = DMatrix::from_fn(10, 8, |i, j| x[(perm[i], j)]);
        let hp = layer.transform(&xp).unwrap();
        for i in 0..10 {
            assert_eq!(hp.row(i), h.row(perm[i]));
        }
    }

    #[test]
    fn one_hot() {
        let t = one_hot_targets(&[0, 3], 4).unwrap();
        assert_eq!(t, DMatrix::from_row_slice(2, 4, &[1., 0., 0., 0., 0., 0., 0., 1.]));
        assert_eq!(one_hot_targets(&[0, 0, 0], 1).unwrap(), DMatrix::from_element(3, 1, 1.0));
        assert!(matches!(
            one_hot_targets(&[0, 4], 4),
            Err(Error::LabelOutOfRange { index: 1, label: 4, .. })
        ));
    }

    #[test]
    fn ridge_identity_case() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let sol = solve_ridge(&i2, &i2, 1.0).unwrap();
        assert!((sol.output_weights.clone() - i2 * 0.5).abs().max() < 1e-15);
    }

    #[test]
    fn ridge_shrinks_with_lambda() {
        let h = random_matrix(30, 8, 7);
        let t = random_matrix(30, 3, 8);
        let mut last = f64::INFINITY;
        let mut last_mse = 0.0;
        for lambda in [1e-3, 1e-1, 1.0, 10.0, 100.0, 1e4] {
            let sol = solve_ridge(&h, &t, lambda).unwrap();
            let norm = sol.output_weights.norm();
            assert!(norm < last);
            last = norm;
            let mse = (&h * &sol.output_weights - &t).norm_squared();
            assert!(mse >= last_mse);
            last_mse = mse;
        }
    }

    #[test]
    fn ridge_matches_normal_equations_and_is_stationary() {
        let h = random_matrix(30, 8, 9);
        let t = random_matrix(30, 2, 10);
        let lambda = 0.7;
        let sol = solve_ridge(&h, &t, lambda).unwrap();
        // explicit inverse oracle
        let gram = h.transpose() * &h + DMatrix::identity(8, 8) * lambda;
        let explicit = gram.try_inverse().unwrap() * h.transpose() * &t;
        let rel = (&sol.output_weights - &explicit).abs().max() / explicit.abs().max();
        assert!(rel < 1e-10, "relative error {rel}");
        let b = &sol.output_weights;
        let grad = h.transpose() * (&h * b - &t) + b * lambda;
        let scale = (h.transpose() * &t).abs().max().max(1.0);
        assert!(grad.abs().max() <= 1e-8 * scale);
    }

    #[test]
    fn ridge_rejects_bad_input() {
        let h = DMatrix::from_element(2, 2, 1.0);
        assert!(solve_ridge(&h, &h, 0.0).is_err());
        let mut bad = h.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(solve_ridge(&bad, &h, 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        let s = DMatrix::from_row_slice(2, 3, &[0.5, 0.5, 0.5, 0.1, 0.3, 0.3]);
        assert_eq!(argmax_rows(&s), vec![0, 1]);
    }

    #[test]
    fn exact_fit_predicts_own_label() {
        let x = DMatrix::<f64>::identity(3, 3);
        let layer = make_hidden_layer(3, &cfg(0, 0, true), 0, None).unwrap();
        let t = one_hot_targets(&[2, 0, 1], 3).unwrap();
        let sol = solve_ridge(&x, &t, 1e-9).unwrap();
        assert_eq!(predict(&layer, &sol, &x).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn standardizer_keeps_binary_columns() {
        let x = DMatrix::from_row_slice(4, 3, &[0., 1., 5., 1., 2., 5., 1., 3., 5., 0., 4., 5.]);
        let s = Standardizer::fit(&x);
        let z = s.transform(&x).unwrap();
        assert_eq!(z.column(0), x.column(0));
        assert!(z.column(1).sum().abs() < 1e-12);
        assert!((z.column(1).norm_squared() / 4.0 - 1.0).abs() < 1e-12);
        assert!(z.column(2).iter().all(|&v| v == 0.0));
    }
}
