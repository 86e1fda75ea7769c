use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary metrics with collusive as the positive class. One-class tasks
/// only carry TPR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tpr: f64,
    pub fpr: Option<f64>,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
}

/// Area under the ROC curve by the Mann–Whitney rank statistic; ties count
/// one half.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: scores.len(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InsufficientData("AUC needs both classes".into()));
    }
    // average ranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if truth[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Full metrics. `scores` rank collusiveness (higher = more collusive).
pub fn evaluate(scores: &[f64], predicted: &[bool], truth: &[bool]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    if tp + fn_ == 0 || fp + tn == 0 {
        return Err(Error::InsufficientData(
            "evaluation needs both classes in the truth labels".into(),
        ));
    }
    Ok(Metrics {
        tpr: tp as f64 / (tp + fn_) as f64,
        fpr: Some(fp as f64 / (fp + tn) as f64),
        accuracy: Some((tp + tn) as f64 / truth.len() as f64),
        auc: Some(roc_auc(scores, truth)?),
    })
}

/// TPR over the positive examples only; FPR, accuracy and AUC are absent.
pub fn evaluate_tpr_only(predicted: &[bool], truth: &[bool]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    let pos: Vec<bool> = predicted.iter().zip(truth).filter(|(_, &t)| t).map(|(&p, _)| p).collect();
    if pos.is_empty() {
        return Err(Error::InsufficientData("TPR needs positive examples".into()));
    }
    Ok(Metrics {
        tpr: pos.iter().filter(|&&p| p).count() as f64 / pos.len() as f64,
        fpr: None,
        accuracy: None,
        auc: None,
    })
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

impl Metrics {
    /// Fold mean; an optional metric is present only if every fold has it.
    pub fn mean(folds: &[Metrics]) -> Option<Metrics> {
        if folds.is_empty() {
            return None;
        }
        Some(Metrics {
            tpr: folds.iter().map(|m| m.tpr).sum::<f64>() / folds.len() as f64,
            fpr: mean_opt(folds.iter().map(|m| m.fpr)),
            accuracy: mean_opt(folds.iter().map(|m| m.accuracy)),
            auc: mean_opt(folds.iter().map(|m| m.auc)),
        })
    }
}
