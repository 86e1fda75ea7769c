//! Platform records, line-delimited corpus ingestion and dataset splitting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Ground-truth label attached to a video or channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Collusive,
    Other,
}

impl Label {
    pub fn is_collusive(self) -> bool {
        self == Label::Collusive
    }
}

/// The fifteen platform genre codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Genre {
    GA,
    EN,
    TE,
    FA,
    MU,
    PB,
    AV,
    ED,
    CO,
    NP,
    HS,
    ST,
    SP,
    PA,
    NA,
}

impl Genre {
    pub const ALL: [Genre; 15] = [
        Genre::GA,
        Genre::EN,
        Genre::TE,
        Genre::FA,
        Genre::MU,
        Genre::PB,
        Genre::AV,
        Genre::ED,
        Genre::CO,
        Genre::NP,
        Genre::HS,
        Genre::ST,
        Genre::SP,
        Genre::PA,
        Genre::NA,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Genre::GA => "GA",
            Genre::EN => "EN",
            Genre::TE => "TE",
            Genre::FA => "FA",
            Genre::MU => "MU",
            Genre::PB => "PB",
            Genre::AV => "AV",
            Genre::ED => "ED",
            Genre::CO => "CO",
            Genre::NP => "NP",
            Genre::HS => "HS",
            Genre::ST => "ST",
            Genre::SP => "SP",
            Genre::PA => "PA",
            Genre::NA => "NA",
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub channel_id: String,
    pub publish_time: i64,
    pub duration_s: u64,
    pub views: u64,
    pub likes: u64,
    pub dislikes: u64,
    pub comment_count: u64,
    pub genre: Genre,
    pub title: String,
    pub uploader_verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub comment_id: String,
    pub video_id: String,
    pub author_id: String,
    pub text: String,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub channel_id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    pub hidden_subscriber_count: u64,
    pub video_count: u64,
    pub subscriber_count: u64,
    pub view_count: u64,
    pub comment_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubscriptionEdge {
    pub channel_id: String,
    pub subscriber_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Videos,
    Comments,
    Channels,
    Subscriptions,
}

impl RecordKind {
    pub const ALL: [RecordKind; 4] = [
        RecordKind::Videos,
        RecordKind::Comments,
        RecordKind::Channels,
        RecordKind::Subscriptions,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            RecordKind::Videos => "videos.jsonl",
            RecordKind::Comments => "comments.jsonl",
            RecordKind::Channels => "channels.jsonl",
            RecordKind::Subscriptions => "subscriptions.jsonl",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Videos => "videos",
            RecordKind::Comments => "comments",
            RecordKind::Channels => "channels",
            RecordKind::Subscriptions => "subscriptions",
        }
    }
}

impl FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RecordKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown record kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub kind: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flag {
    pub kind: String,
    pub line: usize,
    pub id: String,
    pub reason: String,
}

/// Outcome of validating one or more input files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub accepted: BTreeMap<String, usize>,
    pub rejected: Vec<Rejection>,
    pub flagged: Vec<Flag>,
}

impl ValidationReport {
    pub fn accepted_total(&self) -> usize {
        self.accepted.values().sum()
    }

    fn merge(&mut self, other: ValidationReport) {
        for (k, v) in other.accepted {
            *self.accepted.entry(k).or_default() += v;
        }
        self.rejected.extend(other.rejected);
        self.flagged.extend(other.flagged);
    }
}

/// In-memory corpus. Immutable after loading; share by reference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub videos: Vec<VideoRecord>,
    pub comments: Vec<CommentRecord>,
    pub channels: Vec<ChannelRecord>,
    pub subscriptions: Vec<SubscriptionEdge>,
    pub report: ValidationReport,
}

/// Options controlling validation.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Records published after this instant are rejected.
    pub ingestion_time: i64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(i64::MAX);
        LoadOptions {
            ingestion_time: now,
        }
    }
}

// Counts are parsed signed so that negative values produce a readable
// rejection instead of a generic type error.
#[derive(Deserialize)]
struct RawVideo {
    video_id: String,
    channel_id: String,
    publish_time: i64,
    duration_s: i64,
    views: i64,
    likes: i64,
    dislikes: i64,
    comment_count: i64,
    genre: Genre,
    title: String,
    uploader_verified: bool,
    #[serde(default)]
    label: Option<Label>,
}

#[derive(Deserialize)]
struct RawChannel {
    channel_id: String,
    title: String,
    #[serde(default)]
    country: Option<String>,
    hidden_subscriber_count: HiddenCount,
    video_count: i64,
    subscriber_count: i64,
    view_count: i64,
    comment_count: i64,
    #[serde(default)]
    label: Option<Label>,
}

/// Some sources only expose whether the subscriber count is hidden.
#[derive(Deserialize)]
#[serde(untagged)]
enum HiddenCount {
    Count(i64),
    Flag(bool),
}

fn non_negative(values: &[(&str, i64)]) -> std::result::Result<(), String> {
    match values.iter().find(|(_, v)| *v < 0) {
        Some((name, _)) => Err(format!("count < 0 ({name})")),
        None => Ok(()),
    }
}

fn parse_video(line: &str, opts: &LoadOptions) -> std::result::Result<VideoRecord, String> {
    let raw: RawVideo = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    if raw.duration_s < 0 {
        return Err("duration_s < 0".into());
    }
    non_negative(&[
        ("views", raw.views),
        ("likes", raw.likes),
        ("dislikes", raw.dislikes),
        ("comment_count", raw.comment_count),
    ])?;
    if raw.publish_time > opts.ingestion_time {
        return Err("publish_time after ingestion time".into());
    }
    Ok(VideoRecord {
        video_id: raw.video_id,
        channel_id: raw.channel_id,
        publish_time: raw.publish_time,
        duration_s: raw.duration_s as u64,
        views: raw.views as u64,
        likes: raw.likes as u64,
        dislikes: raw.dislikes as u64,
        comment_count: raw.comment_count as u64,
        genre: raw.genre,
        title: raw.title,
        uploader_verified: raw.uploader_verified,
        label: raw.label,
    })
}

fn parse_comment(line: &str) -> std::result::Result<CommentRecord, String> {
    let rec: CommentRecord =
        serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    if rec.text.trim().is_empty() {
        return Err("empty comment text".into());
    }
    Ok(rec)
}

fn parse_channel(line: &str) -> std::result::Result<ChannelRecord, String> {
    let raw: RawChannel = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    let hidden = match raw.hidden_subscriber_count {
        HiddenCount::Count(c) => c,
        HiddenCount::Flag(b) => b as i64,
    };
    non_negative(&[
        ("hidden_subscriber_count", hidden),
        ("video_count", raw.video_count),
        ("subscriber_count", raw.subscriber_count),
        ("view_count", raw.view_count),
        ("comment_count", raw.comment_count),
    ])?;
    Ok(ChannelRecord {
        channel_id: raw.channel_id,
        title: raw.title,
        country: raw.country,
        hidden_subscriber_count: hidden as u64,
        video_count: raw.video_count as u64,
        subscriber_count: raw.subscriber_count as u64,
        view_count: raw.view_count as u64,
        comment_count: raw.comment_count as u64,
        label: raw.label,
    })
}

fn parse_subscription(line: &str) -> std::result::Result<SubscriptionEdge, String> {
    serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))
}

/// Load a single line-delimited file of the given record kind.
///
/// Malformed lines become [`Rejection`]s carrying their 1-based line number;
/// only an unreadable file is fatal.
pub fn load_corpus(path: &Path, kind: RecordKind, opts: &LoadOptions) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut corpus = Corpus::default();
    let mut seen: HashSet<String> = HashSet::new();
    let tag = kind.as_str().to_string();
    let mut accepted = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut reject = |reason: String| {
            corpus.report.rejected.push(Rejection {
                kind: tag.clone(),
                line: line_no,
                reason,
            });
        };
        match kind {
            RecordKind::Videos => match parse_video(&line, opts) {
                Ok(v) if !seen.insert(v.video_id.clone()) => reject("duplicate video_id".into()),
                Ok(v) => {
                    corpus.videos.push(v);
                    accepted += 1;
                }
                Err(r) => reject(r),
            },
            RecordKind::Comments => match parse_comment(&line) {
                Ok(c) if !seen.insert(c.comment_id.clone()) => {
                    reject("duplicate comment_id".into())
                }
                Ok(c) => {
                    corpus.comments.push(c);
                    accepted += 1;
                }
                Err(r) => reject(r),
            },
            RecordKind::Channels => match parse_channel(&line) {
                Ok(c) if !seen.insert(c.channel_id.clone()) => {
                    reject("duplicate channel_id".into())
                }
                Ok(c) => {
                    corpus.channels.push(c);
                    accepted += 1;
                }
                Err(r) => reject(r),
            },
            RecordKind::Subscriptions => match parse_subscription(&line) {
                Ok(e) => {
                    let key = format!("{}\u{1f}{}", e.channel_id, e.subscriber_id);
                    if seen.insert(key) {
                        corpus.subscriptions.push(e);
                        accepted += 1;
                    } else {
                        reject("duplicate subscription pair".into());
                    }
                }
                Err(r) => reject(r),
            },
        }
    }
    corpus.report.accepted.insert(tag, accepted);
    Ok(corpus)
}

impl Corpus {
    /// Load every known file present in `dir` and cross-check comments
    /// against their videos.
    pub fn load_dir(dir: &Path, opts: &LoadOptions) -> Result<Corpus> {
        let mut corpus = Corpus::default();
        let mut any = false;
        for kind in RecordKind::ALL {
            let path = dir.join(kind.file_name());
            if !path.exists() {
                continue;
            }
            any = true;
            let part = load_corpus(&path, kind, opts)?;
            corpus.videos.extend(part.videos);
            corpus.comments.extend(part.comments);
            corpus.channels.extend(part.channels);
            corpus.subscriptions.extend(part.subscriptions);
            corpus.report.merge(part.report);
        }
        if !any {
            return Err(Error::invalid(format!(
                "{} contains none of videos/comments/channels/subscriptions .jsonl",
                dir.display()
            )));
        }
        corpus.flag_early_comments();
        Ok(corpus)
    }

    /// Flag (never drop) comments stamped before their video was published.
    pub fn flag_early_comments(&mut self) {
        let publish: HashMap<&str, i64> = self
            .videos
            .iter()
            .map(|v| (v.video_id.as_str(), v.publish_time))
            .collect();
        self.report.flagged.retain(|f| f.reason != "comment before video publish");
        for (i, c) in self.comments.iter().enumerate() {
            if let Some(&t) = publish.get(c.video_id.as_str()) {
                if c.timestamp < t {
                    self.report.flagged.push(Flag {
                        kind: "comments".into(),
                        line: i + 1,
                        id: c.comment_id.clone(),
                        reason: "comment before video publish".into(),
                    });
                }
            }
        }
    }

    /// Write the four record files into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(RecordKind::Videos.file_name()), &self.videos)?;
        write_jsonl(&dir.join(RecordKind::Comments.file_name()), &self.comments)?;
        write_jsonl(&dir.join(RecordKind::Channels.file_name()), &self.channels)?;
        write_jsonl(
            &dir.join(RecordKind::Subscriptions.file_name()),
            &self.subscriptions,
        )?;
        Ok(())
    }

    /// Comments grouped per video, each group sorted by (timestamp, comment_id).
    pub fn comments_by_video(&self) -> HashMap<&str, Vec<&CommentRecord>> {
        let mut map: HashMap<&str, Vec<&CommentRecord>> = HashMap::new();
        for c in &self.comments {
            map.entry(c.video_id.as_str()).or_default().push(c);
        }
        for list in map.values_mut() {
            list.sort_by(|a, b| {
                a.timestamp
                    .cmp(&b.timestamp)
                    .then_with(|| a.comment_id.cmp(&b.comment_id))
            });
        }
        map
    }

    /// Latest timestamp seen anywhere in the corpus.
    pub fn latest_timestamp(&self) -> Option<i64> {
        let v = self.videos.iter().map(|v| v.publish_time);
        let c = self.comments.iter().map(|c| c.timestamp);
        v.chain(c).max()
    }
}

/// Serialize records one JSON object per line, atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Write-temp-then-rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// One fold of a k-fold partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub fold_index: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds {n} ids")));
    }
    Ok(())
}

fn splits_from_assignment(ids: &[String], fold_of: &[usize], k: usize, seed: u64) -> Vec<DatasetSplit> {
    (0..k)
        .map(|f| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (id, &a) in ids.iter().zip(fold_of) {
                if a == f {
                    test.push(id.clone());
                } else {
                    train.push(id.clone());
                }
            }
            DatasetSplit {
                fold_index: f,
                train_ids: train,
                test_ids: test,
                seed,
            }
        })
        .collect()
}

/// Plain shuffled k-fold. Fold sizes differ by at most one; the first
/// `n % k` folds get the extra element.
pub fn kfold_split(ids: &[String], k: usize, seed: u64) -> Result<Vec<DatasetSplit>> {
    check_k(ids.len(), k)?;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut rng::stage_rng(seed, "kfold"));
    let n = ids.len();
    let mut fold_of = vec![0usize; n];
    let mut pos = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        for &i in &order[pos..pos + size] {
            fold_of[i] = f;
        }
        pos += size;
    }
    Ok(splits_from_assignment(ids, &fold_of, k, seed))
}

/// Stratified k-fold: each class is shuffled independently, then all
/// classes are dealt round-robin so class ratios and fold sizes stay balanced.
pub fn stratified_kfold_split(
    ids: &[String],
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<Vec<DatasetSplit>> {
    if ids.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            got: labels.len(),
        });
    }
    check_k(ids.len(), k)?;
    let mut rng = rng::stage_rng(seed, "stratified-kfold");
    let mut dealt = Vec::with_capacity(ids.len());
    for class in [Label::Collusive, Label::Other] {
        let mut members: Vec<usize> = (0..ids.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        dealt.extend(members);
    }
    let mut fold_of = vec![0usize; ids.len()];
    for (pos, &i) in dealt.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(splits_from_assignment(ids, &fold_of, k, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video_line(id: &str, views: i64) -> String {
        format!(
            r#"{{"video_id":"{id}","channel_id":"c1","publish_time":1000,"duration_s":60,"views":{views},"likes":5,"dislikes":1,"comment_count":2,"genre":"MU","title":"t","uploader_verified":false,"label":"collusive"}}"#
        )
    }

    fn write_tmp(dir: &Path, name: &str, lines: &[String]) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        p
    }

    fn opts() -> LoadOptions {
        LoadOptions {
            ingestion_time: 10_000,
        }
    }

    #[test]
    fn loads_well_formed_videos() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<_> = ["a", "b", "c"].iter().map(|id| video_line(id, 10)).collect();
        let p = write_tmp(dir.path(), "videos.jsonl", &lines);
        let c = load_corpus(&p, RecordKind::Videos, &opts()).unwrap();
        assert_eq!(c.videos.len(), 3);
        assert!(c.report.rejected.is_empty());
        assert_eq!(c.videos[0].label, Some(Label::Collusive));
    }

    #[test]
    fn negative_views_rejected_with_reason() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            dir.path(),
            "videos.jsonl",
            &[video_line("a", 10), video_line("b", -3), "{not json".into()],
        );
        let c = load_corpus(&p, RecordKind::Videos, &opts()).unwrap();
        assert_eq!(c.videos.len(), 1);
        assert_eq!(c.report.rejected.len(), 2);
        assert_eq!(c.report.rejected[0].line, 2);
        assert!(c.report.rejected[0].reason.starts_with("count < 0"));
        assert_eq!(c.report.rejected[1].line, 3);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = load_corpus(Path::new("/nonexistent/v.jsonl"), RecordKind::Videos, &opts());
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn early_comment_is_accepted_and_flagged() {
        let dir = tempfile::tempdir().unwrap();
        write_tmp(dir.path(), "videos.jsonl", &[video_line("v", 10)]);
        write_tmp(
            dir.path(),
            "comments.jsonl",
            &[
                r#"{"comment_id":"x","video_id":"v","author_id":"u","text":"hi","timestamp":900}"#.into(),
                r#"{"comment_id":"y","video_id":"v","author_id":"u","text":"  ","timestamp":1900}"#.into(),
            ],
        );
        let c = Corpus::load_dir(dir.path(), &opts()).unwrap();
        assert_eq!(c.comments.len(), 1);
        assert_eq!(c.report.flagged.len(), 1);
        assert_eq!(c.report.flagged[0].id, "x");
        assert_eq!(c.report.rejected.len(), 1);
    }

    #[test]
    fn hidden_flag_maps_to_count() {
        let line = r#"{"channel_id":"c","title":"t","hidden_subscriber_count":true,"video_count":1,"subscriber_count":2,"view_count":3,"comment_count":4}"#;
        let ch = parse_channel(line).unwrap();
        assert_eq!(ch.hidden_subscriber_count, 1);
        assert_eq!(ch.country, None);
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("id{i}")).collect()
    }

    #[test]
    fn kfold_sizes() {
        let s = kfold_split(&ids(5), 5, 3).unwrap();
        assert!(s.iter().all(|f| f.test_ids.len() == 1));
        let s = kfold_split(&ids(11), 5, 3).unwrap();
        let sizes: Vec<_> = s.iter().map(|f| f.test_ids.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        assert_eq!(kfold_split(&ids(11), 5, 3).unwrap(), s);
    }

    #[test]
    fn kfold_errors() {
        assert!(kfold_split(&ids(3), 5, 0).is_err());
        assert!(kfold_split(&ids(3), 1, 0).is_err());
    }

    #[test]
    fn stratified_keeps_class_balance() {
        let ids = ids(20);
        let labels: Vec<_> = (0..20)
            .map(|i| if i < 10 { Label::Collusive } else { Label::Other })
            .collect();
        let splits = stratified_kfold_split(&ids, &labels, 5, 1).unwrap();
        for s in &splits {
            let pos = s
                .test_ids
                .iter()
                .filter(|id| id[2..].parse::<usize>().unwrap() < 10)
                .count();
            assert_eq!(pos, 2);
            assert_eq!(s.test_ids.len(), 4);
        }
    }
}
