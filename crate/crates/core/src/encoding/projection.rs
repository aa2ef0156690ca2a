//! Sparse random projection with entries in `{-s, 0, +s}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub density: f64,
    pub seed: u64,
}

impl ProjectionSpec {
    /// Spec with the default density `1 / sqrt(in_dim)`.
    pub fn with_default_density(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        Self {
            in_dim,
            out_dim,
            density: 1.0 / (in_dim.max(1) as f64).sqrt(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::invalid("projection dimensions must be positive"));
        }
        if self.out_dim > self.in_dim {
            return Err(Error::invalid(format!(
                "projection out_dim {} exceeds in_dim {}",
                self.out_dim, self.in_dim
            )));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::invalid(format!(
                "projection density {} outside (0, 1]",
                self.density
            )));
        }
        Ok(())
    }

    /// Magnitude of the nonzero entries, `1 / sqrt(density * out_dim)`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.density * self.out_dim as f64).sqrt()
    }
}

/// Row-compressed `out_dim x in_dim` projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProjection {
    spec: ProjectionSpec,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseProjection {
    /// Draws the matrix entry by entry in row-major order from a ChaCha8
    /// stream seeded with `spec.seed`.
    pub fn new(spec: ProjectionSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from_seed(spec.seed);
        let s = spec.scale();
        let rows = (0..spec.out_dim)
            .map(|_| {
                let mut row = Vec::new();
                for j in 0..spec.in_dim {
                    if rng.random::<f64>() < spec.density {
                        let v = if rng.random::<bool>() { s } else { -s };
                        row.push((j, v));
                    }
                }
                row
            })
            .collect();
        Ok(Self { spec, rows })
    }

    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    /// Entry `(i, j)` of the matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c == j)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `P v` for a dense input vector.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.spec.in_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.in_dim,
                found: v.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, p)| p * v[j]).sum::<f64>() + 0.0)
            .collect())
    }
}
