//! Temporal anomaly extraction: comment-count series, recurrent next-step
//! prediction, Gaussian error scoring, and peak geometry.

pub mod gaussian;
pub mod gru;
pub mod peaks;
pub mod series;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use gaussian::{anomaly_scores, fit_error_model, ErrorModel, Ridge};
pub use gru::{prediction_errors, train_predictor, ErrorSequence, GruConfig, GruPredictor};
pub use peaks::{detect_peaks, Peak, PeakParams};
pub use series::{build_time_series, SeriesMode, TimeSeries};

use crate::error::{Error, Result};
use crate::model::VideoRecord;
use crate::rng;

const SECONDS_PER_DAY: f64 = 86_400.0;
pub const DETECTOR_FORMAT_VERSION: u32 = 1;

/// (peak count, mean peak area).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnomalyFeatures {
    pub peak_count: usize,
    pub avg_peak_area: f64,
}

impl AnomalyFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.peak_count as f64, self.avg_peak_area]
    }
}

pub fn anomaly_features(peaks: &[Peak]) -> AnomalyFeatures {
    if peaks.is_empty() {
        return AnomalyFeatures::default();
    }
    AnomalyFeatures {
        peak_count: peaks.len(),
        avg_peak_area: peaks.iter().map(|p| p.area).sum::<f64>() / peaks.len() as f64,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationMetrics {
    /// Days from publishing to the left edge of the first peak.
    pub initial_burst: Option<f64>,
    /// Days from the first peak's left edge to the last peak's right edge.
    pub lifetime: Option<f64>,
}

/// `peaks` must be expressed in series positions and sorted by apex.
pub fn propagation_metrics(peaks: &[Peak], series: &TimeSeries, video: &VideoRecord) -> PropagationMetrics {
    let (Some(first), Some(last)) = (peaks.first(), peaks.last()) else {
        return PropagationMetrics::default();
    };
    let bw = series.bin_width as f64;
    PropagationMetrics {
        initial_burst: Some((series.time_at(first.left) - video.publish_time as f64) / SECONDS_PER_DAY),
        lifetime: Some((last.right - first.left) * bw / SECONDS_PER_DAY),
    }
}

/// Everything needed to turn a video's series into peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub gru: GruConfig,
    pub bin_width: i64,
    pub mode: SeriesMode,
    /// Fraction of normal series held out to fit the error Gaussian.
    pub holdout_fraction: f64,
    /// Quantile of held-out normal scores used as the minimum peak height.
    pub height_quantile: f64,
    pub rel_height: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            gru: GruConfig::default(),
            bin_width: 86_400,
            mode: SeriesMode::Increment,
            holdout_fraction: 0.2,
            height_quantile: 0.95,
            rel_height: 0.5,
        }
    }
}

/// Trained predictor, error model and calibrated peak thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyDetector {
    pub format_version: u32,
    pub config: DetectorConfig,
    pub predictor: GruPredictor,
    pub error_model: ErrorModel,
    pub peak_params: PeakParams,
    pub train_ids: Vec<String>,
    pub holdout_ids: Vec<String>,
}

/// Anomaly scores aligned with series positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSeries {
    pub video_id: String,
    pub first_position: usize,
    pub scores: Vec<f64>,
}

/// Linear-interpolated empirical quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

impl AnomalyDetector {
    /// Train on normal series: the predictor sees `1 - holdout_fraction` of
    /// them, the Gaussian and the height threshold are fitted on the rest.
    pub fn fit(normal_series: &[TimeSeries], config: &DetectorConfig) -> Result<Self> {
        let eligible: Vec<&TimeSeries> = normal_series
            .iter()
            .filter(|s| s.len() > config.gru.horizon)
            .collect();
        if eligible.len() < 4 {
            return Err(Error::InsufficientData(format!(
                "need at least 4 normal series longer than the horizon, got {}",
                eligible.len()
            )));
        }
        let mut order: Vec<usize> = (0..eligible.len()).collect();
        order.shuffle(&mut rng::stage_rng(config.gru.seed, "detector-holdout"));
        let n_hold = ((eligible.len() as f64 * config.holdout_fraction).round() as usize)
            .clamp(2, eligible.len() - 2);
        let (hold_idx, train_idx) = order.split_at(n_hold);
        let mut hold_idx = hold_idx.to_vec();
        let mut train_idx = train_idx.to_vec();
        hold_idx.sort_unstable();
        train_idx.sort_unstable();

        let train: Vec<TimeSeries> = train_idx.iter().map(|&i| eligible[i].clone()).collect();
        let outcome = train_predictor(&train, &config.gru)?;
        let predictor = outcome.predictor;

        let mut held_errors = Vec::new();
        for &i in &hold_idx {
            held_errors.extend(prediction_errors(&predictor, eligible[i])?.errors);
        }
        let error_model = fit_error_model(&held_errors, Ridge::Auto)?;
        let held_scores = anomaly_scores(&error_model, &held_errors)?;
        let min_height = quantile(&held_scores, config.height_quantile);
        let peak_params = PeakParams::new(Some(min_height), Some(min_height / 2.0), config.rel_height)?;

        Ok(AnomalyDetector {
            format_version: DETECTOR_FORMAT_VERSION,
            config: config.clone(),
            predictor,
            error_model,
            peak_params,
            train_ids: train_idx.iter().map(|&i| eligible[i].video_id.clone()).collect(),
            holdout_ids: hold_idx.iter().map(|&i| eligible[i].video_id.clone()).collect(),
        })
    }

    /// Score a series; series no longer than the horizon yield no scores.
    pub fn score(&self, series: &TimeSeries) -> Result<ScoredSeries> {
        if series.mode != self.config.mode || series.bin_width != self.config.bin_width {
            return Err(Error::invalid(format!(
                "series {} was binned differently from the detector's training data",
                series.video_id
            )));
        }
        if series.len() <= self.predictor.horizon {
            return Ok(ScoredSeries {
                video_id: series.video_id.clone(),
                first_position: series.len(),
                scores: Vec::new(),
            });
        }
        let errs = prediction_errors(&self.predictor, series)?;
        Ok(ScoredSeries {
            video_id: series.video_id.clone(),
            first_position: errs.first_position,
            scores: anomaly_scores(&self.error_model, &errs.errors)?,
        })
    }

    /// Peaks in series positions, sorted by apex.
    pub fn peaks(&self, scored: &ScoredSeries) -> Vec<Peak> {
        detect_peaks(&scored.scores, &self.peak_params)
            .into_iter()
            .map(|p| p.shifted(scored.first_position))
            .collect()
    }
}
