//! Minimum covariance determinant by FastMCD concentration steps.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rng::StageRng;

const N_STARTS: usize = 500;
const N_REFINE: usize = 10;
const MAX_CSTEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mcd {
    pub location: Vec<f64>,
    pub covariance: Vec<f64>,
    precision: Vec<f64>,
    pub support: Vec<usize>,
    pub raw_determinant: f64,
}

pub fn chi2_quantile(dof: usize, p: f64) -> f64 {
    ChiSquared::new(dof as f64).expect("positive degrees of freedom").inverse_cdf(p)
}

struct Estimate {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

fn estimate(x: &DMatrix<f64>, idx: &[usize]) -> Estimate {
    let p = x.ncols();
    let n = idx.len() as f64;
    let mut mean = DVector::zeros(p);
    for &i in idx {
        mean += x.row(i).transpose();
    }
    mean /= n;
    let mut cov = DMatrix::zeros(p, p);
    for &i in idx {
        let d = x.row(i).transpose() - &mean;
        cov += &d * d.transpose();
    }
    cov /= n;
    Estimate { mean, cov }
}

/// Precision matrix and log-determinant, or None if singular.
fn invert(cov: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let chol = cov.clone().cholesky()?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    logdet.is_finite().then(|| (chol.inverse(), logdet))
}

fn mahalanobis2(x: &DMatrix<f64>, mean: &DVector<f64>, precision: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            let d = x.row(i).transpose() - mean;
            (d.transpose() * precision * &d)[(0, 0)]
        })
        .collect()
}

fn smallest(d2: &[f64], h: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d2.len()).collect();
    idx.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b)));
    idx.truncate(h);
    idx.sort_unstable();
    idx
}

/// Run up to `steps` concentration steps; returns the final subset and its
/// log-determinant (None if a subset covariance became singular).
fn concentrate(x: &DMatrix<f64>, mut subset: Vec<usize>, h: usize, steps: usize) -> Option<(Vec<usize>, f64)> {
    let e = estimate(x, &subset);
    let (mut prec, mut logdet) = invert(&e.cov)?;
    let mut mean = e.mean;
    for _ in 0..steps {
        let next = smallest(&mahalanobis2(x, &mean, &prec), h);
        if next == subset {
            break;
        }
        let e = estimate(x, &next);
        let Some((p, ld)) = invert(&e.cov) else { break };
        if ld >= logdet {
            break;
        }
        subset = next;
        logdet = ld;
        mean = e.mean;
        prec = p;
    }
    Some((subset, logdet))
}

impl Mcd {
    pub fn fit(rows: &[Vec<f64>], support_fraction: f64, rng: &mut StageRng) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if p == 0 || n < p + 1 {
            return Err(Error::InsufficientData(format!(
                "MCD needs >= dim + 1 = {} samples, got {n}",
                p + 1
            )));
        }
        if !(support_fraction > 0.0 && support_fraction <= 1.0) {
            return Err(Error::invalid(format!("support fraction must be in (0, 1], got {support_fraction}")));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        let h = ((support_fraction * n as f64).ceil() as usize).clamp(p + 1, n);

        let mut candidates: Vec<(Vec<usize>, f64)> = Vec::new();
        for _ in 0..N_STARTS {
            let mut start: Vec<usize> = sample(rng, n, p + 1).into_vec();
            // grow singular starts until the covariance is invertible
            while invert(&estimate(&x, &start).cov).is_none() && start.len() < n {
                let extra = sample(rng, n, n).into_iter().find(|i| !start.contains(i));
                match extra {
                    Some(i) => start.push(i),
                    None => break,
                }
            }
            let e = estimate(&x, &start);
            let Some((prec, _)) = invert(&e.cov) else { continue };
            let subset = smallest(&mahalanobis2(&x, &e.mean, &prec), h);
            if let Some(c) = concentrate(&x, subset, h, 2) {
                candidates.push(c);
            }
        }
        if candidates.is_empty() {
            return Err(Error::Degenerate("every MCD subset covariance is singular".into()));
        }
        candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        candidates.dedup_by(|a, b| a.0 == b.0);
        let (best, best_logdet) = candidates
            .into_iter()
            .take(N_REFINE)
            .filter_map(|(s, _)| concentrate(&x, s, h, MAX_CSTEPS))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .ok_or_else(|| Error::Degenerate("MCD refinement failed".into()))?;

        // consistency correction, then reweighting at the 97.5% quantile
        let raw = estimate(&x, &best);
        let (raw_prec, _) = invert(&raw.cov).ok_or_else(|| Error::Degenerate("singular MCD covariance".into()))?;
        let d2 = mahalanobis2(&x, &raw.mean, &raw_prec);
        let mut sorted = d2.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let factor = median / chi2_quantile(p, 0.5);
        let corrected_prec = &raw_prec / factor;
        let d2 = mahalanobis2(&x, &raw.mean, &corrected_prec);
        let cutoff = chi2_quantile(p, 0.975);
        let support: Vec<usize> = (0..n).filter(|&i| d2[i] <= cutoff).collect();
        if support.len() < p + 1 {
            return Err(Error::Degenerate("too few points survive MCD reweighting".into()));
        }
        let fin = estimate(&x, &support);
        let (prec, _) = invert(&fin.cov).ok_or_else(|| Error::Degenerate("singular reweighted covariance".into()))?;
        Ok(Mcd {
            location: fin.mean.iter().copied().collect(),
            covariance: fin.cov.transpose().iter().copied().collect(),
            precision: prec.transpose().iter().copied().collect(),
            support,
            raw_determinant: best_logdet.exp(),
        })
    }

    /// Squared robust Mahalanobis distance.
    pub fn distance2(&self, x: &[f64]) -> f64 {
        let p = self.location.len();
        let d: Vec<f64> = x.iter().zip(&self.location).map(|(a, b)| a - b).collect();
        let mut s = 0.0;
        for i in 0..p {
            for j in 0..p {
                s += d[i] * self.precision[i * p + j] * d[j];
            }
        }
        s.max(0.0)
    }
}
