//! Seeded synthetic corpus with planted collusive comment bursts, skewed
//! reaction ratios and a community-structured subscriber pool.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    write_jsonl, ChannelRecord, CommentRecord, Corpus, Genre, Label, SubscriptionEdge, VideoRecord,
};
use crate::rng::{self, StageRng};

const DAY: f64 = 86_400.0;
pub const BASE_EPOCH: i64 = 1_600_000_000;

const ORGANIC_WORDS: &[&str] = &[
    "great", "video", "love", "this", "song", "really", "nice", "work", "keep", "going", "awesome", "music",
    "thanks", "sharing", "first", "time", "watching", "from", "india", "brazil", "who", "still", "listening",
    "amazing", "voice", "best", "part", "minute", "funny", "laughed", "hard", "tutorial", "helped", "lot",
    "explain", "better", "please", "make", "more", "content", "like", "editing", "quality", "camera", "sound",
    "cool", "trick", "game", "level", "boss", "fight", "recipe", "tried", "tasted", "delicious", "travel",
    "place", "beautiful", "view", "wow", "incredible", "story", "ending", "sad", "happy", "miss", "old",
    "days", "memories", "school", "teacher", "learned", "today", "question", "answer", "why", "how", "where",
    "when", "team", "match", "goal", "player", "coach", "season", "news", "update", "phone", "review",
    "battery", "price", "worth", "buying", "car", "engine", "speed", "drive", "dance", "moves", "cover",
    "original", "lyrics", "chorus", "beat", "drop", "bass", "guitar", "piano", "drums", "live", "concert",
    "crowd", "energy", "fan", "since", "beginning", "channel", "deserves", "underrated", "legend",
];

const COLLUSIVE_TEMPLATES: &[&str] = &[
    "nice video please support my channel",
    "awesome content subscribed please subscribe back",
    "great work keep it up sub for sub",
    "liked and subscribed return the favour",
    "amazing video check out my latest upload",
    "very nice bro support each other",
    "good job friend i subscribed you",
    "wonderful video lets grow together",
    "superb work visit my channel too",
    "nice one done please do the same",
];

const COUNTRIES: &[&str] = &["IN", "US", "BR", "ID", "PK", "BD", "PH", "GB", "MX", "NG"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_collusive: usize,
    pub n_organic: usize,
    /// Organic comment rate range, comments per day (per-video jitter).
    pub organic_rate: (f64, f64),
    pub horizon_days: f64,
    pub burst_count: (usize, usize),
    pub burst_multiplier: f64,
    pub burst_duration_days: (f64, f64),
    pub near_duplicate_prob: f64,
    /// Collusive comment templates; near-duplicates are edits of these.
    pub text_pool: Vec<String>,
    pub members: usize,
    pub communities: usize,
    pub intra_community_prob: f64,
    pub collusive_subscriptions: (usize, usize),
    pub general_subscribers: usize,
    pub organic_subscriptions: (usize, usize),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_collusive: 200,
            n_organic: 200,
            organic_rate: (3.0, 12.0),
            horizon_days: 60.0,
            burst_count: (1, 3),
            burst_multiplier: 8.0,
            burst_duration_days: (1.0, 3.0),
            near_duplicate_prob: 0.8,
            text_pool: COLLUSIVE_TEMPLATES.iter().map(|s| s.to_string()).collect(),
            members: 300,
            communities: 10,
            intra_community_prob: 0.8,
            collusive_subscriptions: (3, 8),
            general_subscribers: 5000,
            organic_subscriptions: (2, 6),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_collusive == 0 && self.n_organic == 0 {
            return bad("synthetic corpus needs at least one video");
        }
        if !(self.organic_rate.0 > 0.0 && self.organic_rate.1 >= self.organic_rate.0) {
            return bad("organic_rate must be a positive range");
        }
        if !(self.horizon_days > 0.0) {
            return bad("horizon_days must be positive");
        }
        if self.burst_count.0 == 0 || self.burst_count.1 < self.burst_count.0 {
            return bad("burst_count must be a range starting at >= 1");
        }
        if !(self.burst_multiplier > 0.0) {
            return bad("burst_multiplier must be positive");
        }
        let (d0, d1) = self.burst_duration_days;
        if !(d0 > 0.0 && d1 >= d0 && d1 < self.horizon_days) {
            return bad("burst_duration_days must be a positive range shorter than the horizon");
        }
        for (name, p) in [
            ("near_duplicate_prob", self.near_duplicate_prob),
            ("intra_community_prob", self.intra_community_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1]")));
            }
        }
        if self.text_pool.is_empty() || self.text_pool.iter().any(|t| t.trim().is_empty()) {
            return bad("text_pool must hold non-empty texts");
        }
        if self.members == 0 || self.communities == 0 || self.communities > self.members {
            return bad("members and communities must be positive with communities <= members");
        }
        if self.general_subscribers == 0 {
            return bad("general_subscribers must be positive");
        }
        for (name, (lo, hi)) in [
            ("collusive_subscriptions", self.collusive_subscriptions),
            ("organic_subscriptions", self.organic_subscriptions),
        ] {
            if hi < lo {
                return Err(Error::Config(format!("{name} must be a range")));
            }
        }
        Ok(())
    }
}

/// Planted bursts of one collusive video, in unix seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstTruth {
    pub video_id: String,
    pub organic_rate: f64,
    pub windows: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub truth: Vec<BurstTruth>,
}

impl SyntheticCorpus {
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        self.corpus.write_dir(dir)?;
        write_jsonl(&dir.join("bursts.jsonl"), &self.truth)
    }
}

fn organic_text(r: &mut StageRng) -> String {
    let n = r.random_range(4..=9);
    (0..n)
        .map(|_| *ORGANIC_WORDS.choose(r).expect("non-empty vocabulary"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Small random edits: character swap, doubled character, dropped or
/// appended word.
fn perturb(text: &str, r: &mut StageRng) -> String {
    let mut words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    for _ in 0..r.random_range(0..=2) {
        match r.random_range(0..4) {
            0 => {
                let w = r.random_range(0..words.len());
                let mut cs: Vec<char> = words[w].chars().collect();
                if cs.len() > 1 {
                    let i = r.random_range(0..cs.len() - 1);
                    cs.swap(i, i + 1);
                }
                words[w] = cs.into_iter().collect();
            }
            1 => {
                let w = r.random_range(0..words.len());
                let c = words[w].chars().last().unwrap_or('a');
                words[w].push(c);
            }
            2 if words.len() > 2 => {
                let w = r.random_range(0..words.len());
                words.remove(w);
            }
            _ => words.push(["bro", "plz", "friend", "thanks"].choose(r).expect("non-empty").to_string()),
        }
    }
    words.join(" ")
}

fn poisson_times(start: f64, end: f64, rate_per_day: f64, r: &mut StageRng) -> Vec<f64> {
    let exp = Exp::new(rate_per_day / DAY).expect("positive rate");
    let mut t = start;
    let mut out = Vec::new();
    loop {
        t += exp.sample(r);
        if t >= end {
            return out;
        }
        out.push(t);
    }
}

struct VideoDraft {
    comments: Vec<(f64, String, String)>,
    bursts: Vec<(i64, i64)>,
}

fn draft_comments(cfg: &SyntheticConfig, publish: f64, rate: f64, collusive: bool, r: &mut StageRng) -> VideoDraft {
    let end = publish + cfg.horizon_days * DAY;
    let mut comments: Vec<(f64, String, String)> = poisson_times(publish, end, rate, r)
        .into_iter()
        .map(|t| (t, format!("u{:05}", r.random_range(0..cfg.general_subscribers)), organic_text(r)))
        .collect();
    let mut bursts = Vec::new();
    if collusive {
        let n = r.random_range(cfg.burst_count.0..=cfg.burst_count.1);
        for _ in 0..n {
            let dur = r.random_range(cfg.burst_duration_days.0..=cfg.burst_duration_days.1) * DAY;
            let start = publish + r.random_range(0.0..(cfg.horizon_days * DAY - dur));
            let stop = start + dur;
            for t in poisson_times(start, stop, rate * cfg.burst_multiplier, r) {
                let text = if r.random_bool(cfg.near_duplicate_prob) {
                    perturb(cfg.text_pool.choose(r).expect("validated non-empty"), r)
                } else {
                    organic_text(r)
                };
                comments.push((t, format!("m{:04}", r.random_range(0..cfg.members)), text));
            }
            bursts.push((start.floor() as i64, stop.ceil() as i64));
        }
    }
    comments.sort_by(|a, b| a.0.total_cmp(&b.0));
    VideoDraft { comments, bursts }
}

/// Does some planted window reach `multiplier / 2` times the organic rate?
pub fn burst_audit(times: &[i64], truth: &BurstTruth, multiplier: f64) -> bool {
    truth.windows.iter().any(|&(a, b)| {
        let n = times.iter().filter(|&&t| a <= t && t < b).count() as f64;
        let days = (b - a) as f64 / DAY;
        n / days >= multiplier / 2.0 * truth.organic_rate
    })
}

const MAX_REDRAWS: usize = 50;

pub fn generate_synthetic_corpus(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let n = cfg.n_collusive + cfg.n_organic;
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < cfg.n_collusive { Label::Collusive } else { Label::Other })
        .collect();
    labels.shuffle(&mut rng::stage_rng(cfg.seed, "synth/labels"));
    let width = n.to_string().len().max(4);

    let mut corpus = Corpus::default();
    let mut truth = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        let mut r = rng::stage_rng(cfg.seed, &format!("synth/video/{i}"));
        let collusive = label.is_collusive();
        let video_id = format!("v{i:0width$}");
        let channel_id = format!("ch{i:0width$}");
        let publish = BASE_EPOCH + r.random_range(0..300 * 86_400);
        let rate = r.random_range(cfg.organic_rate.0..=cfg.organic_rate.1);

        let mut draft = draft_comments(cfg, publish as f64, rate, collusive, &mut r);
        if collusive {
            let mut attempts = 1;
            loop {
                let times: Vec<i64> = draft.comments.iter().map(|c| c.0.floor() as i64).collect();
                let t = BurstTruth {
                    video_id: video_id.clone(),
                    organic_rate: rate,
                    windows: draft.bursts.clone(),
                };
                if burst_audit(&times, &t, cfg.burst_multiplier) {
                    truth.push(t);
                    break;
                }
                if attempts >= MAX_REDRAWS {
                    return Err(Error::Numerical(format!(
                        "could not plant a burst passing the rate audit for {video_id}"
                    )));
                }
                attempts += 1;
                draft = draft_comments(cfg, publish as f64, rate, true, &mut r);
            }
        }

        let views = LogNormal::new((5000f64).ln(), 1.0).expect("valid").sample(&mut r).round().max(10.0) as u64;
        let alpha = if collusive { r.random_range(0.04..0.12) } else { r.random_range(0.01..0.06) };
        let beta: f64 = if collusive { r.random_range(0.08..0.25) } else { r.random_range(0.02..0.12) };
        let likes = (alpha * views as f64).round() as u64;
        let dislikes = (beta / (1.0 - beta) * likes as f64).round() as u64;
        let title_len = r.random_range(3..=6);
        let title = (0..title_len)
            .map(|_| *ORGANIC_WORDS.choose(&mut r).expect("non-empty"))
            .collect::<Vec<_>>()
            .join(" ");
        corpus.videos.push(VideoRecord {
            video_id: video_id.clone(),
            channel_id: channel_id.clone(),
            publish_time: publish,
            duration_s: r.random_range(60..=1200),
            views,
            likes,
            dislikes,
            comment_count: draft.comments.len() as u64,
            genre: *Genre::ALL.choose(&mut r).expect("15 genres"),
            title,
            uploader_verified: r.random_bool(0.1),
            label: Some(label),
        });
        for (k, (t, author, text)) in draft.comments.into_iter().enumerate() {
            corpus.comments.push(CommentRecord {
                comment_id: format!("{video_id}-c{k:05}"),
                video_id: video_id.clone(),
                author_id: author,
                text,
                timestamp: t.floor() as i64,
            });
        }

        let ln = |m: f64, s: f64, r: &mut StageRng| LogNormal::new(m.ln(), s).expect("valid").sample(r).round() as u64;
        let (video_count, subscriber_count) = if collusive {
            (ln(40.0, 0.5, &mut r), ln(800.0, 0.5, &mut r))
        } else {
            (ln(120.0, 0.8, &mut r), ln(3000.0, 1.0, &mut r))
        };
        corpus.channels.push(ChannelRecord {
            channel_id: channel_id.clone(),
            title: format!("channel {i}"),
            country: r.random_bool(0.8).then(|| COUNTRIES.choose(&mut r).expect("non-empty").to_string()),
            hidden_subscriber_count: u64::from(r.random_bool(if collusive { 0.3 } else { 0.1 })),
            video_count,
            subscriber_count,
            view_count: subscriber_count * ln(20.0, 0.4, &mut r),
            comment_count: ln(if collusive { 60.0 } else { 30.0 }, 0.5, &mut r),
            label: Some(label),
        });

        let mut subs = BTreeSet::new();
        if collusive {
            let community = r.random_range(0..cfg.communities);
            let k = r.random_range(cfg.collusive_subscriptions.0..=cfg.collusive_subscriptions.1);
            let per = cfg.members / cfg.communities;
            for _ in 0..k {
                let m = if r.random_bool(cfg.intra_community_prob) && per > 0 {
                    community * per + r.random_range(0..per)
                } else {
                    r.random_range(0..cfg.members)
                };
                subs.insert(format!("m{m:04}"));
            }
        } else {
            let k = r.random_range(cfg.organic_subscriptions.0..=cfg.organic_subscriptions.1);
            for _ in 0..k {
                subs.insert(format!("u{:05}", r.random_range(0..cfg.general_subscribers)));
            }
        }
        corpus.subscriptions.extend(subs.into_iter().map(|s| SubscriptionEdge {
            channel_id: channel_id.clone(),
            subscriber_id: s,
        }));
    }
    Ok(SyntheticCorpus { corpus, truth })
}
