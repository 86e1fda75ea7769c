//! Maximum-likelihood Gaussian over prediction errors and the squared
//! Mahalanobis anomaly score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative ridge applied when none is given: `1e-6 · trace(Σ) / dim`.
pub const RELATIVE_RIDGE: f64 = 1e-6;
/// Absolute floor so that a zero covariance still inverts.
pub const RIDGE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub mean: Vec<f64>,
    /// Row-major `dim × dim` MLE covariance.
    pub covariance: Vec<f64>,
    pub ridge: f64,
    /// Row-major inverse of `Σ + ridge·I`.
    pub precision: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `max(1e-6 · trace(Σ)/dim, 1e-12)`.
    Auto,
    Fixed(f64),
}

impl ErrorModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Build from explicit parameters.
    pub fn from_parts(mean: Vec<f64>, covariance: Vec<f64>, ridge: f64) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: covariance.len(),
            });
        }
        if ridge < 0.0 {
            return Err(Error::invalid("ridge must be non-negative"));
        }
        let mut m = DMatrix::from_row_slice(d, d, &covariance);
        for i in 0..d {
            m[(i, i)] += ridge;
        }
        let chol = m.cholesky().ok_or_else(|| {
            Error::Numerical("covariance plus ridge is not positive definite".into())
        })?;
        let inv = chol.inverse();
        let precision = (0..d)
            .flat_map(|r| (0..d).map(move |c| (r, c)))
            .map(|(r, c)| 0.5 * (inv[(r, c)] + inv[(c, r)]))
            .collect();
        Ok(ErrorModel {
            mean,
            covariance,
            ridge,
            precision,
        })
    }

    /// `(c − μ)ᵀ (Σ + εI)⁻¹ (c − μ)`, clamped at zero against round-off.
    pub fn score(&self, c: &[f64]) -> Result<f64> {
        let d = self.dim();
        if c.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.len(),
            });
        }
        let diff = DVector::from_iterator(d, c.iter().zip(&self.mean).map(|(a, b)| a - b));
        let p = DMatrix::from_row_slice(d, d, &self.precision);
        Ok((diff.transpose() * p * &diff)[(0, 0)].max(0.0))
    }
}

/// Fit mean and 1/N covariance, then invert `Σ + εI`.
pub fn fit_error_model(errors: &[Vec<f64>], ridge: Ridge) -> Result<ErrorModel> {
    if errors.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 error vectors, got {}",
            errors.len()
        )));
    }
    let d = errors[0].len();
    if d == 0 {
        return Err(Error::invalid("error vectors are empty"));
    }
    if let Some(bad) = errors.iter().find(|e| e.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let n = errors.len() as f64;
    let mut mean = vec![0.0; d];
    for e in errors {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; d * d];
    for e in errors {
        for r in 0..d {
            let dr = e[r] - mean[r];
            for c in 0..d {
                cov[r * d + c] += dr * (e[c] - mean[c]);
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= n);
    let eps = match ridge {
        Ridge::Auto => {
            let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
            (RELATIVE_RIDGE * trace / d as f64).max(RIDGE_FLOOR)
        }
        Ridge::Fixed(e) => e,
    };
    ErrorModel::from_parts(mean, cov, eps)
}

pub fn anomaly_scores(model: &ErrorModel, errors: &[Vec<f64>]) -> Result<Vec<f64>> {
    errors.iter().map(|e| model.score(e)).collect()
}
