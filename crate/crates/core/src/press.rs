//! Closed-form leave-one-out (PRESS) residuals for a ridge readout, with
//! cheap re-evaluation when only the targets change.
//!
//! For `HAT = H (H^T H + lambda I)^-1 H^T` and residuals `R = (I - HAT) T`, the
//! leave-one-out residual of row `i` is `R_i / (1 - h_ii)`. Changing target
//! rows by `dT` moves the residuals by `(I - HAT) dT`, which only needs the
//! columns of `HAT` belonging to the changed rows. The global LOO error is the
//! mean squared PRESS residual over all samples and output columns.

use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use lru::LruCache;
use nalgebra::{DMatrix, DVector};

use crate::elm::{check_lambda, one_hot_targets};
use crate::error::{Error, Result};

/// Smallest admissible `1 - h_ii`.
pub const MIN_LEVERAGE_MARGIN: f64 = 1e-10;

/// Largest `n` for which the full `n x n` hat matrix is stored.
pub const DEFAULT_DENSE_HAT_LIMIT: usize = 4000;

const DEFAULT_COLUMN_CACHE: usize = 1024;

/// A replacement target row for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Flip {
    pub index: usize,
    pub target: Vec<f64>,
}

impl Flip {
    pub fn new(index: usize, target: Vec<f64>) -> Self {
        Self { index, target }
    }

    /// One-hot target row for `label`.
    pub fn to_label(index: usize, label: usize, n_classes: usize) -> Self {
        let mut target = vec![0.0; n_classes];
        target[label] = 1.0;
        Self { index, target }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PressOptions {
    pub dense_hat_limit: usize,
    pub column_cache: usize,
}

impl Default for PressOptions {
    fn default() -> Self {
        Self {
            dense_hat_limit: DEFAULT_DENSE_HAT_LIMIT,
            column_cache: DEFAULT_COLUMN_CACHE,
        }
    }
}

/// Columns of the hat matrix, either precomputed or built on demand.
enum HatColumns {
    Dense(DMatrix<f64>),
    OnDemand {
        h: DMatrix<f64>,
        cache: Mutex<LruCache<usize, Arc<DVector<f64>>>>,
    },
}

impl std::fmt::Debug for HatColumns {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HatColumns::Dense(m) => write!(f, "Dense({}x{})", m.nrows(), m.ncols()),
            HatColumns::OnDemand { h, .. } => write!(f, "OnDemand(n={})", h.nrows()),
        }
    }
}

/// A hat-matrix column, borrowed from the dense matrix or shared from the
/// on-demand cache.
#[derive(Debug, Clone)]
pub enum HatColumn<'a> {
    Borrowed(&'a [f64]),
    Shared(Arc<DVector<f64>>),
}

impl std::ops::Deref for HatColumn<'_> {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        match self {
            HatColumn::Borrowed(s) => s,
            HatColumn::Shared(v) => v.as_slice(),
        }
    }
}

type FlipTerm<'a> = (usize, Vec<f64>, HatColumn<'a>);

/// Leave-one-out state of a ridge model on fixed features `H`.
#[derive(Debug)]
pub struct PressState {
    gram_inverse: DMatrix<f64>,
    hat_diag: DVector<f64>,
    inv_margin: DVector<f64>,
    hat: HatColumns,
    targets: DMatrix<f64>,
    residuals: DMatrix<f64>,
    press: DMatrix<f64>,
    loo_error: f64,
}

fn mean_square(m: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for v in m.iter() {
        acc += v * v;
    }
    acc / m.len() as f64
}

impl PressState {
    pub fn build(h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        Self::build_with(h, t, lambda, PressOptions::default())
    }

    /// Builds from features and integer labels.
    pub fn from_labels(h: &DMatrix<f64>, labels: &[usize], n_classes: usize, lambda: f64) -> Result<Self> {
        Self::build(h, &one_hot_targets(labels, n_classes)?, lambda)
    }

    pub fn build_with(h: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64, options: PressOptions) -> Result<Self> {
        check_lambda(lambda)?;
        let n = h.nrows();
        if n < 2 {
            return Err(Error::invalid(format!("PRESS needs at least 2 samples, got {n}")));
        }
        if t.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t.nrows(),
            });
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PRESS features"));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("PRESS targets"));
        }

        let mut gram = h.tr_mul(h);
        for d in 0..gram.nrows() {
            gram[(d, d)] += lambda;
        }
        let gram_inverse = gram
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .inverse();
        // rows of H G
        let hg = h * &gram_inverse;

        let (hat, fitted) = if n <= options.dense_hat_limit {
            let hat = &hg * h.transpose();
            let fitted = &hat * t;
            (HatColumns::Dense(hat), fitted)
        } else {
            let fitted = &hg * h.tr_mul(t);
            let cap = NonZeroUsize::new(options.column_cache.max(1)).expect("nonzero");
            (
                HatColumns::OnDemand {
                    h: h.clone(),
                    cache: Mutex::new(LruCache::new(cap)),
                },
                fitted,
            )
        };

        let hat_diag = DVector::from_fn(n, |i, _| match &hat {
            HatColumns::Dense(m) => m[(i, i)],
            HatColumns::OnDemand { .. } => hg.row(i).dot(&h.row(i)),
        });
        let mut inv_margin = DVector::zeros(n);
        for i in 0..n {
            let margin = 1.0 - hat_diag[i];
            if margin < MIN_LEVERAGE_MARGIN {
                return Err(Error::NearInterpolation { index: i, margin });
            }
            inv_margin[i] = 1.0 / margin;
        }

        let residuals = t - fitted;
        let mut press = residuals.clone();
        for (i, mut row) in press.row_iter_mut().enumerate() {
            row *= inv_margin[i];
        }
        let loo_error = mean_square(&press);

        Ok(Self {
            gram_inverse,
            hat_diag,
            inv_margin,
            hat,
            targets: t.clone(),
            residuals,
            press,
            loo_error,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.targets.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.targets.ncols()
    }

    pub fn loo_error(&self) -> f64 {
        self.loo_error
    }

    pub fn hat_diag(&self) -> &DVector<f64> {
        &self.hat_diag
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inverse
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn residuals(&self) -> &DMatrix<f64> {
        &self.residuals
    }

    /// Leave-one-out residuals `R_i / (1 - h_ii)`.
    pub fn press_residuals(&self) -> &DMatrix<f64> {
        &self.press
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.hat, HatColumns::Dense(_))
    }

    /// Column `i` of the hat matrix (equal to row `i`, by symmetry).
    pub fn hat_column(&self, i: usize) -> Result<HatColumn<'_>> {
        let n = self.n_samples();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        match &self.hat {
            HatColumns::Dense(m) => Ok(HatColumn::Borrowed(&m.as_slice()[i * n..(i + 1) * n])),
            HatColumns::OnDemand { h, cache } => {
                let mut cache = cache.lock().expect("hat cache poisoned");
                if let Some(col) = cache.get(&i) {
                    return Ok(HatColumn::Shared(Arc::clone(col)));
                }
                let gh = &self.gram_inverse * h.row(i).transpose();
                let col = Arc::new(h * gh);
                cache.put(i, Arc::clone(&col));
                Ok(HatColumn::Shared(col))
            }
        }
    }

    fn validate_flips(&self, flips: &[Flip]) -> Result<()> {
        let n = self.n_samples();
        for (k, f) in flips.iter().enumerate() {
            if f.index >= n {
                return Err(Error::IndexOutOfRange { index: f.index, n });
            }
            if f.target.len() != self.n_outputs() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_outputs(),
                    found: f.target.len(),
                });
            }
            if f.target.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("flip target"));
            }
            if flips[..k].iter().any(|g| g.index == f.index) {
                return Err(Error::invalid(format!("sample {} flipped twice", f.index)));
            }
        }
        Ok(())
    }

    /// Per-flip target deltas and hat columns.
    fn flip_terms(&self, flips: &[Flip]) -> Result<Vec<FlipTerm<'_>>> {
        self.validate_flips(flips)?;
        flips
            .iter()
            .map(|f| {
                let delta: Vec<f64> = f
                    .target
                    .iter()
                    .zip(self.targets.row(f.index).iter())
                    .map(|(new, old)| new - old)
                    .collect();
                Ok((f.index, delta, self.hat_column(f.index)?))
            })
            .collect()
    }

    /// Residual change at `(j, c)`: `dT_jc - sum_k HAT[j, i_k] dT_{i_k c}`.
    #[inline]
    fn residual_delta(terms: &[FlipTerm<'_>], j: usize, c: usize) -> f64 {
        let mut d = 0.0;
        for (i, delta, col) in terms {
            d -= col[j] * delta[c];
            if *i == j {
                d += delta[c];
            }
        }
        d
    }

    /// LOO error after replacing the listed target rows, without modifying
    /// the state.
    pub fn loo_error_after_flip(&self, flips: &[Flip]) -> Result<f64> {
        let terms = self.flip_terms(flips)?;
        let (n, c_out) = (self.n_samples(), self.n_outputs());
        let mut acc = 0.0;
        for c in 0..c_out {
            for j in 0..n {
                let e = self.press[(j, c)] + Self::residual_delta(&terms, j, c) * self.inv_margin[j];
                acc += e * e;
            }
        }
        Ok(acc / (n * c_out) as f64)
    }

    /// Applies the flips to the stored targets. Returns the new LOO error,
    /// bit-identical to what [`loo_error_after_flip`](Self::loo_error_after_flip)
    /// reported for the same flips.
    pub fn commit_flip(&mut self, flips: &[Flip]) -> Result<f64> {
        let (n, c_out) = (self.n_samples(), self.n_outputs());
        let deltas = {
            let terms = self.flip_terms(flips)?;
            DMatrix::from_fn(n, c_out, |j, c| Self::residual_delta(&terms, j, c))
        };
        for c in 0..c_out {
            for j in 0..n {
                let d = deltas[(j, c)];
                self.residuals[(j, c)] += d;
                self.press[(j, c)] += d * self.inv_margin[j];
            }
        }
        for f in flips {
            for (c, v) in f.target.iter().enumerate() {
                self.targets[(f.index, c)] = *v;
            }
        }
        self.loo_error = mean_square(&self.press);
        Ok(self.loo_error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn random_labels(n: usize, c: usize, seed: u64) -> Vec<usize> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| rng.random_range(0..c)).collect()
    }

    #[test]
    fn identity_features_half_leverage() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let s = PressState::build(&i2, &i2, 1.0).unwrap();
        for &h in s.hat_diag().iter() {
            assert!((h - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_leverage_row_keeps_plain_residual() {
        // the third row is orthogonal to the span used by the others
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        let t = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 5.0]);
        let s = PressState::build(&h, &t, 1.0).unwrap();
        assert_eq!(s.hat_diag()[2], 0.0);
        assert_eq!(s.press_residuals()[(2, 0)], s.residuals()[(2, 0)]);
        assert_eq!(s.residuals()[(2, 0)], 5.0);
    }

    #[test]
    fn leverage_bounds() {
        let h = random_matrix(30, 12, 1);
        let s = PressState::from_labels(&h, &random_labels(30, 3, 2), 3, 0.5).unwrap();
        assert!(s.hat_diag().iter().all(|&v| (0.0..1.0).contains(&v)));
        assert!(s.hat_diag().sum() <= 12.0 + 1e-9);
        assert!(s.loo_error() >= 0.0);
    }

    #[test]
    fn identity_flip_is_exact_noop() {
        let h = random_matrix(40, 10, 3);
        let labels = random_labels(40, 4, 4);
        let mut s = PressState::from_labels(&h, &labels, 4, 1.0).unwrap();
        let same = [Flip::to_label(5, labels[5], 4)];
        assert_eq!(s.loo_error_after_flip(&same).unwrap(), s.loo_error());
        let before = s.press_residuals().clone();
        s.commit_flip(&same).unwrap();
        assert_eq!(s.press_residuals(), &before);
    }

    #[test]
    fn commit_matches_query_exactly() {
        let h = random_matrix(40, 10, 5);
        let labels = random_labels(40, 4, 6);
        let mut s = PressState::from_labels(&h, &labels, 4, 1.0).unwrap();
        let flips = [Flip::to_label(3, (labels[3] + 1) % 4, 4), Flip::to_label(17, (labels[17] + 2) % 4, 4)];
        let q = s.loo_error_after_flip(&flips).unwrap();
        assert_eq!(s.loo_error_after_flip(&flips).unwrap(), q);
        assert_eq!(s.commit_flip(&flips).unwrap(), q);
        assert_eq!(s.loo_error(), q);
        assert_eq!(s.loo_error_after_flip(&[]).unwrap(), q);
    }

    #[test]
    fn flip_errors() {
        let h = random_matrix(10, 3, 7);
        let s = PressState::from_labels(&h, &random_labels(10, 2, 8), 2, 1.0).unwrap();
        assert!(matches!(
            s.loo_error_after_flip(&[Flip::to_label(10, 0, 2)]),
            Err(Error::IndexOutOfRange { index: 10, n: 10 })
        ));
        assert!(s
            .loo_error_after_flip(&[Flip::to_label(1, 0, 2), Flip::to_label(1, 1, 2)])
            .is_err());
        assert!(s.loo_error_after_flip(&[Flip::new(1, vec![1.0])]).is_err());
    }

    #[test]
    fn build_errors() {
        let h = random_matrix(1, 3, 9);
        assert!(PressState::build(&h, &DMatrix::zeros(1, 2), 1.0).is_err());
        let h = random_matrix(4, 3, 9);
        assert!(PressState::build(&h, &DMatrix::zeros(4, 2), 0.0).is_err());
        let mut bad = h.clone();
        bad[(0, 0)] = f64::INFINITY;
        assert!(matches!(
            PressState::build(&bad, &DMatrix::zeros(4, 2), 1.0),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn near_interpolation_guard() {
        // one huge row dominates its own fit
        let mut h = DMatrix::zeros(3, 2);
        h[(0, 0)] = 1e8;
        h[(1, 1)] = 1.0;
        h[(2, 1)] = 1.0;
        let t = DMatrix::from_element(3, 1, 1.0);
        assert!(matches!(
            PressState::build(&h, &t, 1e-3),
            Err(Error::NearInterpolation { index: 0, .. })
        ));
    }

    #[test]
    fn on_demand_columns_match_dense() {
        let h = random_matrix(60, 8, 10);
        let labels = random_labels(60, 3, 11);
        let t = one_hot_targets(&labels, 3).unwrap();
        let dense = PressState::build(&h, &t, 0.3).unwrap();
        let lazy = PressState::build_with(
            &h,
            &t,
            0.3,
            PressOptions {
                dense_hat_limit: 10,
                column_cache: 4,
            },
        )
        .unwrap();
        assert!(dense.is_dense() && !lazy.is_dense());
        assert!((dense.loo_error() - lazy.loo_error()).abs() < 1e-12);
        for i in [0, 7, 59, 7, 3, 12, 20, 0] {
            let a = dense.hat_column(i).unwrap();
            let b = lazy.hat_column(i).unwrap();
            assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-12));
        }
        let flips = [Flip::to_label(4, (labels[4] + 1) % 3, 3)];
        let qa = dense.loo_error_after_flip(&flips).unwrap();
        let qb = lazy.loo_error_after_flip(&flips).unwrap();
        assert!((qa - qb).abs() < 1e-12);
    }
}
