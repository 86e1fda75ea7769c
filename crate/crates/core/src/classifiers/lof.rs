//! Local outlier factor against a fixed reference set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LRD_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lof {
    pub k: usize,
    pub reference: Vec<Vec<f64>>,
    pub k_distance: Vec<f64>,
    pub lrd: Vec<f64>,
    /// LOF of each reference point computed without itself.
    pub training_lof: Vec<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Indices and distances of the `k` nearest reference points, ties broken by
/// index; `skip` excludes one reference index.
fn neighbors(reference: &[Vec<f64>], x: &[f64], k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> = reference
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, r)| (i, dist(r, x)))
        .collect();
    d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    d.truncate(k);
    d
}

impl Lof {
    pub fn fit(rows: &[Vec<f64>], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("LOF needs k >= 1"));
        }
        if rows.len() < k + 1 {
            return Err(Error::InsufficientData(format!(
                "LOF with k={k} needs >= {} samples, got {}",
                k + 1,
                rows.len()
            )));
        }
        let hoods: Vec<Vec<(usize, f64)>> = (0..rows.len()).map(|i| neighbors(rows, &rows[i], k, Some(i))).collect();
        let k_distance: Vec<f64> = hoods.iter().map(|h| h[k - 1].1).collect();
        let lrd: Vec<f64> = hoods
            .iter()
            .map(|h| {
                let reach = h.iter().map(|&(j, d)| d.max(k_distance[j])).sum::<f64>() / k as f64;
                1.0 / (reach + LRD_GUARD)
            })
            .collect();
        let training_lof = hoods
            .iter()
            .enumerate()
            .map(|(i, h)| h.iter().map(|&(j, _)| lrd[j]).sum::<f64>() / k as f64 / lrd[i])
            .collect();
        Ok(Lof {
            k,
            reference: rows.to_vec(),
            k_distance,
            lrd,
            training_lof,
        })
    }

    pub fn factor(&self, x: &[f64]) -> f64 {
        let h = neighbors(&self.reference, x, self.k, None);
        let reach = h.iter().map(|&(j, d)| d.max(self.k_distance[j])).sum::<f64>() / self.k as f64;
        let lrd_x = 1.0 / (reach + LRD_GUARD);
        h.iter().map(|&(j, _)| self.lrd[j]).sum::<f64>() / self.k as f64 / lrd_x
    }
}
