//! Summary statistics, the normal quantile threshold and Welch's t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Normal distribution fitted by sample mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFit {
    pub mean: f64,
    pub std: f64,
}

impl NormalFit {
    pub fn fit(scores: &[f64]) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::Degenerate(format!(
                "normal fit needs at least 2 scores, got {}",
                scores.len()
            )));
        }
        let std = sample_variance(scores).sqrt();
        if !(std > 0.0) {
            return Err(Error::Degenerate("scores have zero variance".into()));
        }
        Ok(Self {
            mean: mean(scores),
            std,
        })
    }

    /// `mean + z(q) * std`.
    pub fn threshold(&self, quantile: f64) -> Result<f64> {
        Ok(self.mean + standard_normal_quantile(quantile)? * self.std)
    }
}

/// Inverse CDF of the standard normal distribution.
pub fn standard_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("quantile {p} outside (0, 1)")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(p))
}

/// Threshold at `quantile` of a normal distribution fitted to `scores`.
pub fn fit_normal_threshold(scores: &[f64], quantile: f64) -> Result<f64> {
    NormalFit::fit(scores)?.threshold(quantile)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub p_value: f64,
    pub dof: f64,
}

/// Two-sided Welch's t-test for a difference in means, `a` minus `b`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate(format!(
            "welch test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    if !(va + vb > 0.0) {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let diff = mean(a) - mean(b);
    let t = diff / (va + vb).sqrt();
    let dof = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p_value = if t == 0.0 {
        1.0
    } else {
        let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::invalid(e.to_string()))?;
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(WelchTest { t, p_value, dof })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_quantile_is_mean() {
        let scores = [1.0, 2.0, 3.0, 10.0];
        let thr = fit_normal_threshold(&scores, 0.5).unwrap();
        assert!((thr - mean(&scores)).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_rejected() {
        assert!(matches!(
            fit_normal_threshold(&[3.0, 3.0, 3.0], 0.99),
            Err(Error::Degenerate(_))
        ));
        assert!(fit_normal_threshold(&[3.0], 0.99).is_err());
    }

    #[test]
    fn identical_samples_give_unit_p() {
        let a = [1.0, 2.0, 4.0, 7.0];
        let w = welch_t(&a, &a).unwrap();
        assert_eq!(w.t, 0.0);
        assert_eq!(w.p_value, 1.0);
    }

    #[test]
    fn separated_samples_are_significant() {
        let a = [0.0, 0.001, -0.001, 0.0005];
        let b = [10.0, 10.001, 9.999, 10.0005];
        let w = welch_t(&a, &b).unwrap();
        assert!(w.t < 0.0);
        assert!(w.p_value < 1e-3);
    }

    #[test]
    fn degenerate_samples_error() {
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
        assert!(welch_t(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn quantile_domain() {
        assert!(standard_normal_quantile(0.0).is_err());
        assert!(standard_normal_quantile(1.0).is_err());
        assert!((standard_normal_quantile(0.99).unwrap() - 2.3263).abs() < 1e-4);
    }
}
