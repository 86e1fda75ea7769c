//! Co-subscriber channel graph, small-world statistics, descriptive corpus
//! distributions and propagation CDFs.

pub mod graph;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use graph::{
    build_channel_graph, giant_component, network_stats, random_graph_baseline, ChannelGraph, NetworkStats,
    RandomBaseline, Summary,
};

use crate::anomaly::PropagationMetrics;
use crate::model::{ChannelRecord, Genre, VideoRecord};

const STOPWORDS: &str = include_str!("../../resources/stopwords.txt");

/// Bundled stopword list (lowercase).
pub fn default_stopwords() -> BTreeSet<String> {
    STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Counts for all 15 genre codes, zeros included.
pub fn genre_histogram(videos: &[VideoRecord]) -> BTreeMap<Genre, usize> {
    let mut h: BTreeMap<Genre, usize> = Genre::ALL.iter().map(|&g| (g, 0)).collect();
    for v in videos {
        *h.entry(v.genre).or_insert(0) += 1;
    }
    h
}

/// Lowercased alphanumeric title tokens minus stopwords and tokens of at
/// most two characters.
pub fn title_terms<'a>(titles: impl IntoIterator<Item = &'a str>, stopwords: &BTreeSet<String>) -> BTreeMap<String, usize> {
    let mut terms = BTreeMap::new();
    for t in titles {
        for tok in t.to_lowercase().split(|c: char| !c.is_alphanumeric()) {
            if tok.chars().count() <= 2 || stopwords.contains(tok) {
                continue;
            }
            *terms.entry(tok.to_string()).or_insert(0) += 1;
        }
    }
    terms
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountBucket {
    /// 0 or 1.
    ZeroOne,
    /// 1 < c < 100.
    Low,
    /// 100 ≤ c ≤ 1000.
    Medium,
    /// c > 1000.
    High,
}

impl CountBucket {
    pub const ALL: [CountBucket; 4] = [CountBucket::ZeroOne, CountBucket::Low, CountBucket::Medium, CountBucket::High];

    pub fn of(count: u64) -> CountBucket {
        match count {
            0 | 1 => CountBucket::ZeroOne,
            2..=99 => CountBucket::Low,
            100..=1000 => CountBucket::Medium,
            _ => CountBucket::High,
        }
    }
}

pub fn bucket_histogram(counts: impl IntoIterator<Item = u64>) -> BTreeMap<CountBucket, usize> {
    let mut h: BTreeMap<CountBucket, usize> = CountBucket::ALL.iter().map(|&b| (b, 0)).collect();
    for c in counts {
        *h.entry(CountBucket::of(c)).or_insert(0) += 1;
    }
    h
}

pub const UNSPECIFIED_COUNTRY: &str = "unspecified";

pub fn country_histogram(channels: &[ChannelRecord]) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for c in channels {
        let key = match c.country.as_deref().map(str::trim) {
            Some(s) if !s.is_empty() => s.to_string(),
            _ => UNSPECIFIED_COUNTRY.to_string(),
        };
        *h.entry(key).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub genres: BTreeMap<Genre, usize>,
    pub title_terms: BTreeMap<String, usize>,
    pub video_count_buckets: BTreeMap<CountBucket, usize>,
    pub subscriber_count_buckets: BTreeMap<CountBucket, usize>,
    pub view_count_buckets: BTreeMap<CountBucket, usize>,
    pub countries: BTreeMap<String, usize>,
}

pub fn descriptive_distributions(videos: &[VideoRecord], channels: &[ChannelRecord]) -> Descriptive {
    let stop = default_stopwords();
    Descriptive {
        genres: genre_histogram(videos),
        title_terms: title_terms(videos.iter().map(|v| v.title.as_str()), &stop),
        video_count_buckets: bucket_histogram(channels.iter().map(|c| c.video_count)),
        subscriber_count_buckets: bucket_histogram(channels.iter().map(|c| c.subscriber_count)),
        view_count_buckets: bucket_histogram(channels.iter().map(|c| c.view_count)),
        countries: country_histogram(channels),
    }
}

pub const CDF_DAYS: [f64; 5] = [1.0, 7.0, 30.0, 90.0, 365.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub thresholds_days: Vec<f64>,
    /// Fraction of videos with peaks whose initial burst is ≤ each threshold.
    pub initial_burst_cdf: Vec<f64>,
    pub lifetime_cdf: Vec<f64>,
    pub videos_with_peaks: usize,
    pub videos_without_peaks: usize,
}

fn cdf(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    CDF_DAYS
        .iter()
        .map(|&t| values.iter().filter(|&&v| v <= t).count() as f64 / values.len() as f64)
        .collect()
}

pub fn propagation_report(metrics: &[PropagationMetrics]) -> PropagationReport {
    let bursts: Vec<f64> = metrics.iter().filter_map(|m| m.initial_burst).collect();
    let lifetimes: Vec<f64> = metrics.iter().filter_map(|m| m.lifetime).collect();
    PropagationReport {
        thresholds_days: if bursts.is_empty() { Vec::new() } else { CDF_DAYS.to_vec() },
        initial_burst_cdf: cdf(&bursts),
        lifetime_cdf: cdf(&lifetimes),
        videos_with_peaks: bursts.len(),
        videos_without_peaks: metrics.len() - bursts.len(),
    }
}
