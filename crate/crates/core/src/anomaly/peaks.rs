//! Peak finding with topographic prominence and interpolated widths.
//!
//! Semantics follow the common signal-processing convention: a peak is a
//! sample (or flat plateau, reported at its midpoint) strictly higher than
//! both neighbours; samples at either border never qualify. Prominence is
//! measured against the lowest point reached on each side before the signal
//! climbs above the peak, and widths are taken at
//! `height − rel_height · prominence` with linear interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub min_height: Option<f64>,
    pub min_prominence: Option<f64>,
    /// Relative height (of the prominence) below the apex where width is measured.
    pub rel_height: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams {
            min_height: None,
            min_prominence: None,
            rel_height: 0.5,
        }
    }
}

impl PeakParams {
    pub fn new(min_height: Option<f64>, min_prominence: Option<f64>, rel_height: f64) -> Result<Self> {
        if !(rel_height > 0.0 && rel_height <= 1.0) {
            return Err(Error::invalid(format!("rel_height must be in (0, 1], got {rel_height}")));
        }
        Ok(PeakParams {
            min_height,
            min_prominence,
            rel_height,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub apex: usize,
    pub height: f64,
    pub prominence: f64,
    pub left_base: usize,
    pub right_base: usize,
    /// Level at which the width was evaluated.
    pub width_height: f64,
    /// Interpolated left crossing (fractional index).
    pub left: f64,
    /// Interpolated right crossing (fractional index).
    pub right: f64,
    pub width: f64,
    /// Integral of the non-negative part of the signal over `[left, right]`.
    pub area: f64,
}

impl Peak {
    /// The same peak with every position moved by `offset` samples.
    pub fn shifted(&self, offset: usize) -> Peak {
        Peak {
            apex: self.apex + offset,
            left_base: self.left_base + offset,
            right_base: self.right_base + offset,
            left: self.left + offset as f64,
            right: self.right + offset as f64,
            ..self.clone()
        }
    }
}

/// Indices of local maxima; plateaus report their (floored) midpoint.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut peaks = Vec::new();
    if n < 3 {
        return peaks;
    }
    let mut i = 1;
    let i_max = n - 1;
    while i < i_max {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < i_max && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }
    peaks
}

/// (prominence, left_base, right_base) of the sample at `peak`.
pub fn prominence(x: &[f64], peak: usize) -> (f64, usize, usize) {
    let h = x[peak];
    let mut left_min = h;
    let mut left_base = peak;
    let mut i = peak as isize;
    while i >= 0 && x[i as usize] <= h {
        if x[i as usize] < left_min {
            left_min = x[i as usize];
            left_base = i as usize;
        }
        i -= 1;
    }
    let mut right_min = h;
    let mut right_base = peak;
    let mut j = peak;
    while j < x.len() && x[j] <= h {
        if x[j] < right_min {
            right_min = x[j];
            right_base = j;
        }
        j += 1;
    }
    (h - left_min.max(right_min), left_base, right_base)
}

fn crossings(x: &[f64], peak: usize, left_base: usize, right_base: usize, level: f64) -> (f64, f64) {
    let mut i = peak;
    while left_base < i && level < x[i] {
        i -= 1;
    }
    let mut left = i as f64;
    if x[i] < level {
        left += (level - x[i]) / (x[i + 1] - x[i]);
    }
    let mut j = peak;
    while j < right_base && level < x[j] {
        j += 1;
    }
    let mut right = j as f64;
    if x[j] < level {
        right -= (level - x[j]) / (x[j - 1] - x[j]);
    }
    (left, right)
}

/// Integral over `[a, b]` of the piecewise-linear interpolant of `max(x, 0)`.
pub fn integrate(x: &[f64], a: f64, b: f64) -> f64 {
    if x.is_empty() || b <= a {
        return 0.0;
    }
    let at = |p: f64| -> f64 {
        let p = p.clamp(0.0, (x.len() - 1) as f64);
        let k = (p.floor() as usize).min(x.len() - 1);
        if k + 1 >= x.len() {
            return x[k].max(0.0);
        }
        let f = p - k as f64;
        (x[k].max(0.0)) * (1.0 - f) + (x[k + 1].max(0.0)) * f
    };
    let mut area = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (lo.floor() + 1.0).min(b);
        area += 0.5 * (at(lo) + at(hi)) * (hi - lo);
        lo = hi;
    }
    area
}

pub fn detect_peaks(scores: &[f64], params: &PeakParams) -> Vec<Peak> {
    local_maxima(scores)
        .into_iter()
        .filter(|&p| params.min_height.is_none_or(|h| scores[p] >= h))
        .filter_map(|p| {
            let (prom, lb, rb) = prominence(scores, p);
            if params.min_prominence.is_some_and(|m| prom < m) {
                return None;
            }
            let level = scores[p] - prom * params.rel_height;
            let (left, right) = crossings(scores, p, lb, rb, level);
            Some(Peak {
                apex: p,
                height: scores[p],
                prominence: prom,
                left_base: lb,
                right_base: rb,
                width_height: level,
                left,
                right,
                width: right - left,
                area: integrate(scores, left, right),
            })
        })
        .collect()
}
