//! Common front for the one-class models: fitting on standardized
//! positives, inlier-oriented scores and decision thresholds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::iforest::IsolationForest;
use super::lof::Lof;
use super::mcd::{chi2_quantile, Mcd};
use super::ocsvm::{scale_gamma, Ocsvm};
use super::{check_rows, Standardizer};
use crate::anomaly::quantile;
use crate::error::{Error, Result};
use crate::rng;

pub const ONE_CLASS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OneClassKind {
    Ocsvm,
    Iforest,
    Mcd,
    Lof,
}

impl OneClassKind {
    pub const ALL: [OneClassKind; 4] = [OneClassKind::Ocsvm, OneClassKind::Iforest, OneClassKind::Mcd, OneClassKind::Lof];

    pub fn as_str(self) -> &'static str {
        match self {
            OneClassKind::Ocsvm => "ocsvm",
            OneClassKind::Iforest => "iforest",
            OneClassKind::Mcd => "mcd",
            OneClassKind::Lof => "lof",
        }
    }
}

impl fmt::Display for OneClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OneClassKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OneClassKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown one-class kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassParams {
    pub nu: f64,
    /// RBF width; `None` selects `1 / (dim · variance)`.
    pub gamma: Option<f64>,
    pub svm_tolerance: f64,
    pub n_trees: usize,
    pub subsample: usize,
    pub support_fraction: f64,
    pub k: usize,
    /// Fraction of training points placed below the iforest/lof threshold.
    pub contamination: f64,
    pub seed: u64,
}

impl Default for OneClassParams {
    fn default() -> Self {
        OneClassParams {
            nu: 0.1,
            gamma: None,
            svm_tolerance: 1e-3,
            n_trees: 100,
            subsample: 256,
            support_fraction: 0.75,
            k: 20,
            contamination: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Fitted {
    Ocsvm(Ocsvm),
    Iforest(IsolationForest),
    Mcd(Mcd),
    Lof(Lof),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassModel {
    pub format_version: u32,
    pub kind: OneClassKind,
    pub params: OneClassParams,
    pub scaler: Standardizer,
    pub threshold: f64,
    pub fitted: Fitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneClassScore {
    /// Higher is more inlier-like for every kind.
    pub score: f64,
    pub is_inlier: bool,
}

impl OneClassModel {
    /// Inlier-oriented score of an already standardized point.
    pub fn score_standardized(&self, x: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Ocsvm(m) => m.decision(x),
            Fitted::Iforest(m) => -m.anomaly_score(x),
            Fitted::Mcd(m) => -m.distance2(x),
            Fitted::Lof(m) => -m.factor(x),
        }
    }

    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }
}

/// Fit one model on positive-class rows (raw units).
pub fn train_one_class(rows: &[Vec<f64>], kind: OneClassKind, params: &OneClassParams) -> Result<OneClassModel> {
    check_rows(rows)?;
    let scaler = Standardizer::fit(rows)?;
    if kind != OneClassKind::Iforest && scaler.all_constant() {
        return Err(Error::Degenerate(format!("{kind}: every feature has zero variance")));
    }
    let x = scaler.transform_all(rows)?;
    let mut r = rng::stage_rng(params.seed, kind.as_str());
    let (fitted, threshold) = match kind {
        OneClassKind::Ocsvm => {
            let gamma = match params.gamma {
                Some(g) => g,
                None => scale_gamma(&x)?,
            };
            (Fitted::Ocsvm(Ocsvm::fit(&x, params.nu, gamma, params.svm_tolerance)?), 0.0)
        }
        OneClassKind::Iforest => {
            let f = IsolationForest::fit(&x, params.n_trees, params.subsample, &mut r)?;
            let train: Vec<f64> = x.iter().map(|p| -f.anomaly_score(p)).collect();
            (Fitted::Iforest(f), quantile(&train, params.contamination))
        }
        OneClassKind::Mcd => {
            let m = Mcd::fit(&x, params.support_fraction, &mut r)?;
            (Fitted::Mcd(m), -chi2_quantile(x[0].len(), 0.975))
        }
        OneClassKind::Lof => {
            let m = Lof::fit(&x, params.k)?;
            let train: Vec<f64> = m.training_lof.iter().map(|v| -v).collect();
            (Fitted::Lof(m), quantile(&train, params.contamination))
        }
    };
    Ok(OneClassModel {
        format_version: ONE_CLASS_FORMAT_VERSION,
        kind,
        params: params.clone(),
        scaler,
        threshold,
        fitted,
    })
}

pub fn score_one_class(model: &OneClassModel, x: &[f64]) -> Result<OneClassScore> {
    let z = model.scaler.transform(x)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input to one-class model"));
    }
    let score = model.score_standardized(&z);
    Ok(OneClassScore {
        score,
        is_inlier: score >= model.threshold,
    })
}
