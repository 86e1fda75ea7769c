use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CommentRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesMode {
    /// Running comment totals.
    Cumulative,
    /// Per-bin comment counts.
    Increment,
}

/// Binned comment-count sequence of one video. Points are `dim`-dimensional
/// and stored row-major in `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub video_id: String,
    pub bin_width: i64,
    pub t0: i64,
    pub mode: SeriesMode,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        video_id: impl Into<String>,
        bin_width: i64,
        t0: i64,
        mode: SeriesMode,
        dim: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::invalid("series values must be a non-empty multiple of dim"));
        }
        if bin_width <= 0 {
            return Err(Error::invalid("bin_width must be positive"));
        }
        Ok(TimeSeries {
            video_id: video_id.into(),
            bin_width,
            t0,
            mode,
            dim,
            values,
        })
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    /// Start time of a (possibly fractional) bin position.
    pub fn time_at(&self, position: f64) -> f64 {
        self.t0 as f64 + position * self.bin_width as f64
    }
}

/// Bin a video's comments. Bins start at the first comment and run through
/// the bin holding the last one.
pub fn build_time_series(
    comments: &[&CommentRecord],
    bin_width: i64,
    mode: SeriesMode,
) -> Result<TimeSeries> {
    if bin_width <= 0 {
        return Err(Error::invalid("bin_width must be positive"));
    }
    let first = comments
        .iter()
        .map(|c| c.timestamp)
        .min()
        .ok_or_else(|| Error::InsufficientData("empty series: video has no comments".into()))?;
    let last = comments.iter().map(|c| c.timestamp).max().unwrap_or(first);
    let n_bins = ((last - first) / bin_width + 1) as usize;
    let mut counts = vec![0.0; n_bins];
    for c in comments {
        counts[((c.timestamp - first) / bin_width) as usize] += 1.0;
    }
    if mode == SeriesMode::Cumulative {
        let mut acc = 0.0;
        for v in counts.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    TimeSeries::new(comments[0].video_id.clone(), bin_width, first, mode, 1, counts)
}
