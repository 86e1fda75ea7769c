//! ν-one-class SVM solved by sequential minimal optimization.
//!
//! Dual: minimize ½ αᵀQα subject to 0 ≤ αᵢ ≤ 1 and Σαᵢ = νl, with
//! Qᵢⱼ = exp(−γ‖xᵢ − xⱼ‖²). Working pairs are chosen with second-order
//! information; the decision function is f(x) = Σ αᵢ K(xᵢ, x) − ρ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ocsvm {
    pub gamma: f64,
    pub nu: f64,
    pub support: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub rho: f64,
    /// Maximal violating-pair gap m(α) − M(α) at termination.
    pub kkt_residual: f64,
    pub iterations: usize,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp()
}

/// `1 / (dim · var)` over all entries of the (standardized) training matrix.
pub fn scale_gamma(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.iter().map(Vec::len).sum::<usize>() as f64;
    let mean = rows.iter().flatten().sum::<f64>() / n;
    let var = rows.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Degenerate("training data has zero variance".into()));
    }
    Ok(1.0 / (rows[0].len() as f64 * var))
}

impl Ocsvm {
    pub fn fit(rows: &[Vec<f64>], nu: f64, gamma: f64, tolerance: f64) -> Result<Self> {
        let l = rows.len();
        if l < 2 {
            return Err(Error::InsufficientData(format!("one-class SVM needs >= 2 samples, got {l}")));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::invalid(format!("nu must be in (0, 1], got {nu}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        let mut q = vec![0.0; l * l];
        for i in 0..l {
            for j in i..l {
                let k = rbf(&rows[i], &rows[j], gamma);
                q[i * l + j] = k;
                q[j * l + i] = k;
            }
        }
        let total = nu * l as f64;
        let n_full = total.floor() as usize;
        let mut alpha = vec![0.0; l];
        for a in alpha.iter_mut().take(n_full) {
            *a = 1.0;
        }
        if n_full < l {
            alpha[n_full] = total - n_full as f64;
        }
        let mut grad = vec![0.0; l];
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                for j in 0..l {
                    grad[j] += a * q[i * l + j];
                }
            }
        }

        let max_iter = (100 * l).max(10_000_000);
        let mut iterations = 0;
        let residual = loop {
            // i maximizes −G over α < 1, j minimizes the second-order bound
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = None;
            for t in 0..l {
                if alpha[t] < 1.0 && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i_sel = Some(t);
                }
            }
            let mut gmin = f64::INFINITY;
            let mut j_sel = None;
            let mut obj_min = f64::INFINITY;
            if let Some(i) = i_sel {
                for t in 0..l {
                    if alpha[t] > 0.0 {
                        gmin = gmin.min(-grad[t]);
                        let b = gmax + grad[t];
                        if b > 0.0 {
                            let a = q[i * l + i] + q[t * l + t] - 2.0 * q[i * l + t];
                            let obj = -(b * b) / if a > 0.0 { a } else { TAU };
                            if obj <= obj_min {
                                obj_min = obj;
                                j_sel = Some(t);
                            }
                        }
                    }
                }
            }
            let gap = gmax - gmin;
            let (Some(i), Some(j)) = (i_sel, j_sel) else { break gap.max(0.0) };
            if gap < tolerance {
                break gap;
            }
            if iterations >= max_iter {
                return Err(Error::Numerical(format!(
                    "SMO did not converge in {max_iter} iterations (gap {gap})"
                )));
            }
            iterations += 1;

            let (old_i, old_j) = (alpha[i], alpha[j]);
            let mut quad = q[i * l + i] + q[j * l + j] - 2.0 * q[i * l + j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = old_i + old_j;
            let mut ai = old_i - delta;
            let mut aj = old_j + delta;
            if sum > 1.0 {
                if ai > 1.0 {
                    ai = 1.0;
                    aj = sum - 1.0;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > 1.0 {
                if aj > 1.0 {
                    aj = 1.0;
                    ai = sum - 1.0;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
            alpha[i] = ai;
            alpha[j] = aj;
            let (di, dj) = (ai - old_i, aj - old_j);
            for t in 0..l {
                grad[t] += q[i * l + t] * di + q[j * l + t] * dj;
            }
        };

        // ρ from free variables, else the midpoint of the feasible interval
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..l {
            if alpha[t] >= 1.0 {
                lb = lb.max(grad[t]);
            } else if alpha[t] <= 0.0 {
                ub = ub.min(grad[t]);
            } else {
                sum_free += grad[t];
                n_free += 1;
            }
        }
        let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };

        // rescale so the coefficients sum to one; the sign of f is unchanged
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for t in 0..l {
            if alpha[t] > 0.0 {
                support.push(rows[t].clone());
                coef.push(alpha[t] / total);
            }
        }
        Ok(Ocsvm {
            gamma,
            nu,
            support,
            alpha: coef,
            rho: rho / total,
            kkt_residual: residual,
            iterations,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.alpha)
            .map(|(s, a)| a * rbf(s, x, self.gamma))
            .sum::<f64>()
            - self.rho
    }
}
