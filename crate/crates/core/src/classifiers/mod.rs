//! Supervised denoising-autoencoder classifier, the one-class suite,
//! evaluation metrics and drop-one feature importance.

pub mod dac;
pub mod iforest;
pub mod importance;
pub mod lof;
pub mod mcd;
pub mod metrics;
pub mod ocsvm;
pub mod one_class;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dac::{train_dac, DacConfig, DacModel};
pub use importance::{feature_importance, Importance};
pub use metrics::{evaluate, evaluate_tpr_only, roc_auc, Metrics};
pub use one_class::{score_one_class, train_one_class, OneClassKind, OneClassModel, OneClassParams, OneClassScore};

use crate::error::{Error, Result};

/// Per-feature z-score parameters fitted on a training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant features keep 1.0.
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = check_rows(rows)?;
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut constant = vec![false; dim];
        let std = var
            .iter()
            .zip(&mut constant)
            .map(|(v, c)| {
                let s = (v / n).sqrt();
                if s > 1e-12 * (1.0 + s) && s.is_finite() && s > 0.0 {
                    s
                } else {
                    *c = true;
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, std, constant })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn all_constant(&self) -> bool {
        self.constant.iter().all(|&c| c)
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

/// Non-empty, equal-length, finite rows; returns their arity.
pub(crate) fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Err(Error::InsufficientData("no training rows".into()));
    };
    let dim = first.len();
    if dim == 0 {
        return Err(Error::invalid("feature vectors are empty"));
    }
    for r in rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
    }
    Ok(dim)
}

/// Multiply every coordinate by an independent `U(1 - amount, 1 + amount)`.
pub fn corrupt_input<R: Rng + ?Sized>(x: &[f64], amount: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(amount >= 0.0) {
        return Err(Error::invalid(format!("corruption amount must be >= 0, got {amount}")));
    }
    if amount == 0.0 {
        return Ok(x.to_vec());
    }
    Ok(x.iter()
        .map(|v| v * rng.random_range(1.0 - amount..=1.0 + amount))
        .collect())
}
