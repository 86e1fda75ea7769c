//! Comment-similarity features: peak-time comment windows, the per-video
//! similarity score, and assembly of the fused video vector.

pub mod embed;
pub mod transport;
pub mod wmd;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use embed::{EmbeddingProvider, FileEmbedder, HashEmbedder, RemoteEmbedder};
pub use wmd::{WmdResult, WordVectors};

use crate::anomaly::{AnomalyFeatures, Peak, TimeSeries};
use crate::error::{Error, Result};
use crate::metadata::{MetadataMode, VideoFeatures};
use crate::model::CommentRecord;

pub const DEFAULT_WINDOW: usize = 10;

/// Assign comments to the peak intervals `[t0 + left·bw, t0 + right·bw]`
/// (closed). A comment inside overlapping intervals goes to the earlier peak
/// only. Peaks without comments are absent from the map.
pub fn select_peak_comments<'a>(
    comments: &[&'a CommentRecord],
    peaks: &[Peak],
    series: &TimeSeries,
) -> BTreeMap<usize, Vec<&'a CommentRecord>> {
    let intervals: Vec<(f64, f64)> = peaks
        .iter()
        .map(|p| (series.time_at(p.left), series.time_at(p.right)))
        .collect();
    let mut out: BTreeMap<usize, Vec<&CommentRecord>> = BTreeMap::new();
    for &c in comments {
        let t = c.timestamp as f64;
        if let Some(i) = intervals.iter().position(|&(lo, hi)| lo <= t && t <= hi) {
            out.entry(i).or_default().push(c);
        }
    }
    out
}

/// A query comment with the comments that preceded it in its window.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<'a> {
    pub query: &'a CommentRecord,
    pub context: Vec<&'a CommentRecord>,
    pub peak_index: usize,
}

/// Slide a window of `w` comments; the last comment is the query. Fewer than
/// `w` (but at least 2) comments form a single window.
pub fn make_windows<'a>(peak_comments: &[&'a CommentRecord], w: usize, peak_index: usize) -> Result<Vec<Window<'a>>> {
    if w < 2 {
        return Err(Error::invalid(format!("window size must be >= 2, got {w}")));
    }
    let n = peak_comments.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let make = |slice: &[&'a CommentRecord]| Window {
        query: slice[slice.len() - 1],
        context: slice[..slice.len() - 1].to_vec(),
        peak_index,
    };
    if n < w {
        return Ok(vec![make(peak_comments)]);
    }
    Ok(peak_comments.windows(w).map(make).collect())
}

/// How a query is compared with its context.
#[derive(Clone, Copy)]
pub enum Scorer<'a> {
    /// Dot product of unit sentence embeddings.
    Embedding(&'a dyn EmbeddingProvider),
    /// `1 / (1 + WMD)` over word vectors.
    Wmd(&'a WordVectors),
}

impl std::fmt::Debug for Scorer<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scorer::Embedding(p) => write!(f, "Embedding({})", p.provider_id()),
            Scorer::Wmd(_) => f.write_str("Wmd"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EtaTrace {
    /// (peak index, mean window score) for every peak with a scored window.
    pub per_peak: Vec<(usize, f64)>,
    pub windows_scored: usize,
    /// Windows dropped because a text had no in-vocabulary token (WMD only).
    pub windows_skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EtaResult {
    pub eta: f64,
    /// Set when no window could be scored and η fell back to 0.
    pub no_scorable_windows: bool,
    pub trace: EtaTrace,
}

fn embed_windows(windows: &[Vec<Window<'_>>], provider: &dyn EmbeddingProvider) -> Result<HashMap<String, Vec<f64>>> {
    let mut ids: Vec<&CommentRecord> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for w in windows.iter().flatten() {
        for c in w.context.iter().chain(std::iter::once(&w.query)) {
            if seen.insert(c.comment_id.as_str()) {
                ids.push(c);
            }
        }
    }
    let texts: Vec<&str> = ids.iter().map(|c| c.text.as_str()).collect();
    let vectors = provider.embed(&texts)?;
    if vectors.len() != texts.len() {
        return Err(Error::Provider {
            provider: provider.provider_id().to_string(),
            batch_len: texts.len(),
            reason: format!("returned {} vectors", vectors.len()),
        });
    }
    Ok(ids.into_iter().map(|c| c.comment_id.clone()).zip(vectors).collect())
}

/// η = mean over peaks of the mean over windows of the best query/context
/// similarity. Peaks without a scorable window do not enter the mean.
pub fn similarity_eta(per_peak_windows: &[Vec<Window<'_>>], scorer: Scorer<'_>) -> Result<EtaResult> {
    let mut trace = EtaTrace::default();
    let embeddings = match scorer {
        Scorer::Embedding(p) => Some(embed_windows(per_peak_windows, p)?),
        Scorer::Wmd(_) => None,
    };
    for windows in per_peak_windows {
        let mut sum = 0.0;
        let mut count = 0usize;
        for w in windows {
            let best = match (scorer, &embeddings) {
                (Scorer::Embedding(_), Some(emb)) => {
                    let q = &emb[&w.query.comment_id];
                    w.context
                        .iter()
                        .map(|c| embed::dot(q, &emb[&c.comment_id]))
                        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
                }
                (Scorer::Wmd(vectors), _) => {
                    let q = wmd::tokenize(&w.query.text);
                    w.context
                        .iter()
                        .filter_map(|c| wmd::wmd(&q, &wmd::tokenize(&c.text), vectors).ok())
                        .map(|r| r.similarity)
                        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
                }
                _ => unreachable!("embeddings computed for the embedding scorer"),
            };
            match best {
                Some(s) => {
                    sum += s;
                    count += 1;
                }
                None => trace.windows_skipped += 1,
            }
        }
        if count > 0 {
            let peak_index = windows[0].peak_index;
            trace.per_peak.push((peak_index, sum / count as f64));
            trace.windows_scored += count;
        }
    }
    if trace.per_peak.is_empty() {
        return Ok(EtaResult {
            eta: 0.0,
            no_scorable_windows: true,
            trace,
        });
    }
    let eta = trace.per_peak.iter().map(|(_, s)| s).sum::<f64>() / trace.per_peak.len() as f64;
    Ok(EtaResult {
        eta,
        no_scorable_windows: false,
        trace,
    })
}

/// (η, total comment count) for one video.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommentFeatures {
    pub similarity: f64,
    pub total_comments: usize,
    /// η defaulted to 0 (no peaks or no scorable windows).
    pub similarity_defaulted: bool,
    pub trace: EtaTrace,
}

impl CommentFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.similarity, self.total_comments as f64]
    }
}

/// `comments` are all of the video's comments sorted by timestamp; `peaks`
/// are in series positions.
pub fn comment_features(
    comments: &[&CommentRecord],
    peaks: &[Peak],
    series: &TimeSeries,
    scorer: Scorer<'_>,
    window: usize,
) -> Result<CommentFeatures> {
    if let Some(c) = comments.iter().find(|c| c.video_id != series.video_id) {
        return Err(Error::invalid(format!(
            "comment {} belongs to {} not {}",
            c.comment_id, c.video_id, series.video_id
        )));
    }
    let selected = select_peak_comments(comments, peaks, series);
    let mut per_peak = Vec::new();
    for (&peak_index, list) in &selected {
        let w = make_windows(list, window, peak_index)?;
        if !w.is_empty() {
            per_peak.push(w);
        }
    }
    let eta = similarity_eta(&per_peak, scorer)?;
    Ok(CommentFeatures {
        similarity: eta.eta,
        total_comments: comments.len(),
        similarity_defaulted: eta.no_scorable_windows,
        trace: eta.trace,
    })
}

/// Fixed-order 7-vector
/// `(activeness, favorability, duration, peak_count, avg_peak_area, similarity, total_comments)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedFeature {
    pub video_id: String,
    pub values: [f64; 7],
}

impl FusedFeature {
    pub const NAMES: [&'static str; 7] = [
        "activeness",
        "favorability",
        "duration",
        "peak_count",
        "avg_peak_area",
        "similarity",
        "total_comments",
    ];
}

pub fn fuse(
    video_id: &str,
    metadata: &VideoFeatures,
    anomaly: &AnomalyFeatures,
    comments: &CommentFeatures,
) -> Result<FusedFeature> {
    if metadata.mode != MetadataMode::NoViewRate || metadata.view_rate.is_some() {
        return Err(Error::invalid(
            "fused vector takes metadata features without view rate",
        ));
    }
    let values = [
        metadata.activeness,
        metadata.favorability,
        metadata.duration,
        anomaly.peak_count as f64,
        anomaly.avg_peak_area,
        comments.similarity,
        comments.total_comments as f64,
    ];
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite fused entry {} for {video_id}",
            FusedFeature::NAMES[i]
        )));
    }
    Ok(FusedFeature {
        video_id: video_id.to_string(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::SeriesMode;
    use crate::metadata::MetadataFlags;

    fn comment(id: usize, t: i64, text: &str) -> CommentRecord {
        CommentRecord {
            comment_id: format!("c{id:03}"),
            video_id: "v".into(),
            author_id: "a".into(),
            text: text.into(),
            timestamp: t,
        }
    }

    fn peak(left: f64, right: f64) -> Peak {
        Peak {
            apex: ((left + right) / 2.0) as usize,
            height: 1.0,
            prominence: 1.0,
            left_base: 0,
            right_base: 0,
            width_height: 0.5,
            left,
            right,
            width: right - left,
            area: 1.0,
        }
    }

    fn series() -> TimeSeries {
        TimeSeries::new("v", 10, 0, SeriesMode::Increment, 1, vec![0.0; 10]).unwrap()
    }

    #[test]
    fn selection_by_interval() {
        let cs = [comment(1, 15, "a"), comment(2, 35, "b"), comment(3, 55, "c")];
        let refs: Vec<_> = cs.iter().collect();
        assert!(select_peak_comments(&refs, &[], &series()).is_empty());
        let sel = select_peak_comments(&refs, &[peak(2.0, 4.0)], &series());
        assert_eq!(sel[&0].len(), 1);
        assert_eq!(sel[&0][0].comment_id, "c002");
        // boundary included
        let b = [comment(4, 20, "x")];
        let sel = select_peak_comments(&[&b[0]], &[peak(2.0, 4.0)], &series());
        assert_eq!(sel[&0].len(), 1);
    }

    #[test]
    fn overlap_goes_to_earlier_peak() {
        let cs = [comment(1, 35, "a")];
        let sel = select_peak_comments(&[&cs[0]], &[peak(2.0, 4.0), peak(3.0, 5.0)], &series());
        assert_eq!(sel.keys().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn window_counts() {
        let cs: Vec<_> = (1..=12).map(|i| comment(i, i as i64, "t")).collect();
        let refs: Vec<_> = cs.iter().collect();
        let w = make_windows(&refs[..10], 10, 0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].query.comment_id, "c010");
        assert_eq!(w[0].context.len(), 9);
        let w = make_windows(&refs, 10, 0).unwrap();
        let q: Vec<_> = w.iter().map(|w| w.query.comment_id.as_str()).collect();
        assert_eq!(q, vec!["c010", "c011", "c012"]);
        assert!(make_windows(&refs[..1], 10, 0).unwrap().is_empty());
        assert_eq!(make_windows(&refs[..4], 10, 0).unwrap().len(), 1);
        assert!(make_windows(&refs, 1, 0).is_err());
    }

    struct Orthogonal;

    impl EmbeddingProvider for Orthogonal {
        fn provider_id(&self) -> &str {
            "orthogonal"
        }
        fn dim(&self) -> usize {
            64
        }
        fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
            Ok(texts
                .iter()
                .map(|t| {
                    let k: usize = t.parse().unwrap();
                    let mut v = vec![0.0; 64];
                    v[k] = 1.0;
                    v
                })
                .collect())
        }
    }

    #[test]
    fn identical_texts_give_one() {
        let cs: Vec<_> = (0..15).map(|i| comment(i, i as i64, "same text")).collect();
        let refs: Vec<_> = cs.iter().collect();
        let w = make_windows(&refs, 10, 0).unwrap();
        let e = HashEmbedder::new(0, 32).unwrap();
        let r = similarity_eta(&[w], Scorer::Embedding(&e)).unwrap();
        assert!((r.eta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_texts_give_zero() {
        let cs: Vec<_> = (0..12).map(|i| comment(i, i as i64, &i.to_string())).collect();
        let refs: Vec<_> = cs.iter().collect();
        let w = make_windows(&refs, 10, 0).unwrap();
        let r = similarity_eta(&[w], Scorer::Embedding(&Orthogonal)).unwrap();
        assert_eq!(r.eta, 0.0);
        assert!(!r.no_scorable_windows);
    }

    #[test]
    fn eta_is_mean_over_peaks() {
        // peak 0: query matches context 0.4; peak 1: 0.8
        struct Fixed;
        impl EmbeddingProvider for Fixed {
            fn provider_id(&self) -> &str {
                "fixed"
            }
            fn dim(&self) -> usize {
                2
            }
            fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
                Ok(texts
                    .iter()
                    .map(|t| match *t {
                        "a" => vec![1.0, 0.0],
                        "b" => vec![0.4, (1.0f64 - 0.16).sqrt()],
                        "c" => vec![0.8, 0.6],
                        _ => unreachable!(),
                    })
                    .collect())
            }
        }
        let cs = [comment(1, 1, "a"), comment(2, 2, "b"), comment(3, 3, "a"), comment(4, 4, "c")];
        let p0 = make_windows(&[&cs[0], &cs[1]], 10, 0).unwrap();
        let p1 = make_windows(&[&cs[2], &cs[3]], 10, 1).unwrap();
        let r = similarity_eta(&[p0, p1], Scorer::Embedding(&Fixed)).unwrap();
        assert!((r.eta - 0.6).abs() < 1e-12);
        assert_eq!(r.trace.per_peak.len(), 2);
    }

    #[test]
    fn no_windows_defaults_to_zero() {
        let r = similarity_eta(&[], Scorer::Embedding(&Orthogonal)).unwrap();
        assert_eq!(r.eta, 0.0);
        assert!(r.no_scorable_windows);
    }

    #[test]
    fn peakless_video_features() {
        let cs: Vec<_> = (0..57).map(|i| comment(i, i as i64, "x")).collect();
        let refs: Vec<_> = cs.iter().collect();
        let e = HashEmbedder::new(0, 16).unwrap();
        let f = comment_features(&refs, &[], &series(), Scorer::Embedding(&e), 10).unwrap();
        assert_eq!(f.to_vec(), vec![0.0, 57.0]);
        assert!(f.similarity_defaulted);
    }

    #[test]
    fn wmd_scorer_identical_corpus() {
        let mut m = HashMap::new();
        m.insert("free".to_string(), vec![1.0, 0.0]);
        m.insert("likes".to_string(), vec![0.0, 1.0]);
        let wv = WordVectors::from_map(m).unwrap();
        let cs: Vec<_> = (0..10).map(|i| comment(i, i as i64 * 10, "free likes")).collect();
        let refs: Vec<_> = cs.iter().collect();
        let f = comment_features(&refs, &[peak(0.0, 9.0)], &series(), Scorer::Wmd(&wv), 10).unwrap();
        assert_eq!(f.similarity, 1.0);
    }

    fn vf(mode: MetadataMode) -> VideoFeatures {
        VideoFeatures {
            activeness: 0.25,
            favorability: 0.25,
            view_rate: (mode == MetadataMode::Full).then_some(10.0),
            duration: 360.0,
            mode,
            flags: MetadataFlags::default(),
        }
    }

    #[test]
    fn fuse_concatenates_in_order() {
        let a = AnomalyFeatures {
            peak_count: 2,
            avg_peak_area: 2.0,
        };
        let c = CommentFeatures {
            similarity: 0.6,
            total_comments: 200,
            ..Default::default()
        };
        let f = fuse("v", &vf(MetadataMode::NoViewRate), &a, &c).unwrap();
        assert_eq!(f.values, [0.25, 0.25, 360.0, 2.0, 2.0, 0.6, 200.0]);
        assert!(fuse("v", &vf(MetadataMode::Full), &a, &c).is_err());
        let mut bad = c.clone();
        bad.similarity = f64::NAN;
        assert!(fuse("v", &vf(MetadataMode::NoViewRate), &a, &bad).is_err());
    }

    #[test]
    fn fuse_zero_parts() {
        let mut m = vf(MetadataMode::NoViewRate);
        m.activeness = 0.0;
        m.favorability = 0.0;
        m.duration = 0.0;
        let f = fuse("v", &m, &AnomalyFeatures::default(), &CommentFeatures::default()).unwrap();
        assert_eq!(f.values, [0.0; 7]);
    }
}
