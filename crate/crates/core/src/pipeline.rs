//! End-to-end task runs under k-fold cross-validation.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytics::{propagation_report, PropagationReport};
use crate::anomaly::{
    anomaly_features, build_time_series, propagation_metrics, AnomalyDetector, AnomalyFeatures, DetectorConfig,
    PropagationMetrics, TimeSeries,
};
use crate::classifiers::importance::select_columns;
use crate::classifiers::{
    evaluate, evaluate_tpr_only, feature_importance, score_one_class, train_dac, train_one_class, DacConfig,
    Importance, Metrics, OneClassKind,
};
use crate::comments::embed::{provider_from_spec, CachingEmbedder, EmbeddingProvider};
use crate::comments::{comment_features, fuse, CommentFeatures, FusedFeature, Scorer};
use crate::config::{Config, PipelineConfig};
use crate::error::{Error, Result};
use crate::artifact::{FeatureRow, FeatureTable};
use crate::metadata::{extract_channel_features, extract_video_features, ChannelFeatures, MetadataMode, VideoFeatures};
use crate::model::{kfold_split, stratified_kfold_split, CommentRecord, Corpus, DatasetSplit, Label, VideoRecord};
use crate::rng::derive_seed;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Likes,
    Subscriptions,
    Comments,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Likes => "likes",
            Task::Subscriptions => "subscriptions",
            Task::Comments => "comments",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "likes" => Ok(Task::Likes),
            "subscriptions" => Ok(Task::Subscriptions),
            "comments" => Ok(Task::Comments),
            _ => Err(Error::Config(format!("unknown task `{s}`"))),
        }
    }
}

/// One label read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAccess {
    pub seq: usize,
    /// None for reads outside any fold (fold assignment).
    pub fold: Option<usize>,
    pub stage: String,
    pub id: String,
}

/// Hands out labels and logs every read. While a fold is open its test ids
/// are sealed; reading one before [`LabelOracle::unseal`] is an error.
#[derive(Debug)]
pub struct LabelOracle {
    labels: BTreeMap<String, Label>,
    sealed: RefCell<BTreeSet<String>>,
    fold: RefCell<Option<usize>>,
    log: RefCell<Vec<LabelAccess>>,
}

impl LabelOracle {
    pub fn new(labels: BTreeMap<String, Label>) -> Self {
        LabelOracle {
            labels,
            sealed: RefCell::new(BTreeSet::new()),
            fold: RefCell::new(None),
            log: RefCell::new(Vec::new()),
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.labels.keys().cloned().collect()
    }

    pub fn open_fold(&self, fold: usize, test_ids: &[String]) {
        *self.fold.borrow_mut() = Some(fold);
        *self.sealed.borrow_mut() = test_ids.iter().cloned().collect();
    }

    /// Called once the fold's test items have been scored.
    pub fn unseal(&self) {
        self.sealed.borrow_mut().clear();
    }

    pub fn close_fold(&self) {
        self.unseal();
        *self.fold.borrow_mut() = None;
    }

    pub fn read(&self, stage: &str, id: &str) -> Result<Label> {
        let fold = *self.fold.borrow();
        if self.sealed.borrow().contains(id) {
            return Err(Error::LabelLeak(format!(
                "stage `{stage}` asked for the label of test item {id} in fold {} before scoring",
                fold.unwrap_or(0)
            )));
        }
        let label = *self
            .labels
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no label for {id}")))?;
        let mut log = self.log.borrow_mut();
        let seq = log.len();
        log.push(LabelAccess {
            seq,
            fold,
            stage: stage.to_string(),
            id: id.to_string(),
        });
        Ok(label)
    }

    pub fn log(&self) -> Vec<LabelAccess> {
        self.log.borrow().clone()
    }
}

/// Label reads per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub reads_by_stage: BTreeMap<String, usize>,
    pub total_reads: usize,
}

impl AuditSummary {
    pub fn of(log: &[LabelAccess]) -> Self {
        let mut reads_by_stage = BTreeMap::new();
        for a in log {
            *reads_by_stage.entry(a.stage.clone()).or_insert(0) += 1;
        }
        AuditSummary {
            reads_by_stage,
            total_reads: log.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: BTreeMap<String, Metrics>,
}

/// Propagation CDFs of the test-fold videos, per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationTables {
    pub collusive: PropagationReport,
    pub other: PropagationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub task: Task,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub models: Vec<String>,
    pub folds: Vec<FoldReport>,
    pub mean: BTreeMap<String, Metrics>,
    pub importances: Option<Vec<Importance>>,
    pub propagation: Option<PropagationTables>,
    /// Seconds per stage; only with `record_timings`.
    pub timings: Option<BTreeMap<String, f64>>,
    pub label_audit: Option<AuditSummary>,
}

/// A report plus the full label-access log.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub audit_log: Vec<LabelAccess>,
}

struct Clock {
    enabled: bool,
    totals: BTreeMap<String, f64>,
}

impl Clock {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            *self.totals.entry(stage.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        }
        out
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.totals)
    }
}

struct Seeds(BTreeMap<String, u64>);

impl Seeds {
    fn get(&mut self, root: u64, stage: &str) -> u64 {
        let s = derive_seed(root, stage);
        self.0.insert(stage.to_string(), s);
        s
    }
}

/// Check that the corpus holds what `task` needs. Runs before any training.
pub fn check_inputs(task: Task, corpus: &Corpus) -> Result<()> {
    let missing = |what: &str| Err(Error::InsufficientData(format!("{task} task needs {what} records")));
    match task {
        Task::Likes => {
            if corpus.videos.iter().all(|v| v.label != Some(Label::Collusive)) {
                return missing("labeled collusive video");
            }
        }
        Task::Subscriptions => {
            if corpus.channels.iter().all(|c| c.label != Some(Label::Collusive)) {
                return missing("labeled collusive channel");
            }
        }
        Task::Comments => {
            if corpus.comments.is_empty() {
                return missing("comment");
            }
            if corpus.videos.iter().all(|v| v.label.is_none()) {
                return missing("labeled video");
            }
        }
    }
    Ok(())
}

pub fn run_task(task: Task, corpus: &Corpus, config: &Config) -> Result<RunOutput> {
    check_inputs(task, corpus)?;
    let p = &config.pipeline;
    if p.folds < 2 {
        return Err(Error::Config(format!("folds must be >= 2, got {}", p.folds)));
    }
    match task {
        Task::Likes | Task::Subscriptions => run_one_class(task, corpus, config),
        Task::Comments => run_comments(corpus, config),
    }
}

fn empty_report(task: Task, config: &Config) -> RunReport {
    RunReport {
        format_version: REPORT_FORMAT_VERSION,
        task,
        seed: config.pipeline.seed,
        config: config.snapshot(),
        seeds: BTreeMap::new(),
        models: Vec::new(),
        folds: Vec::new(),
        mean: BTreeMap::new(),
        importances: None,
        propagation: None,
        timings: None,
        label_audit: None,
    }
}

fn fold_means(models: &[String], folds: &[FoldReport]) -> BTreeMap<String, Metrics> {
    models
        .iter()
        .filter_map(|m| {
            let per: Vec<Metrics> = folds.iter().filter_map(|f| f.metrics.get(m).copied()).collect();
            Metrics::mean(&per).map(|mean| (m.clone(), mean))
        })
        .collect()
}

/// Static feature table for a task: full video metadata (likes), channel
/// counts (subscriptions), or metadata without view rate (comments).
pub fn feature_table(task: Task, corpus: &Corpus, now: i64) -> Result<FeatureTable> {
    let (names, rows): (Vec<&str>, Vec<FeatureRow>) = match task {
        Task::Likes | Task::Comments => {
            let mode = if task == Task::Likes { MetadataMode::Full } else { MetadataMode::NoViewRate };
            let rows = corpus
                .videos
                .iter()
                .map(|v| {
                    Ok(FeatureRow {
                        id: v.video_id.clone(),
                        label: v.label,
                        values: extract_video_features(v, mode, now)?.to_vec(),
                    })
                })
                .collect::<Result<_>>()?;
            (VideoFeatures::names(mode).to_vec(), rows)
        }
        Task::Subscriptions => {
            let rows = corpus
                .channels
                .iter()
                .map(|c| FeatureRow {
                    id: c.channel_id.clone(),
                    label: c.label,
                    values: extract_channel_features(c).to_vec(),
                })
                .collect();
            (ChannelFeatures::NAMES.to_vec(), rows)
        }
    };
    Ok(FeatureTable {
        names: names.into_iter().map(str::to_string).collect(),
        rows,
    })
}

/// Feature rows of every labeled item for a one-class task, keyed by id.
pub fn one_class_rows(task: Task, corpus: &Corpus, now: i64) -> Result<BTreeMap<String, (Vec<f64>, Label)>> {
    if task == Task::Comments {
        return Err(Error::invalid("comments task has no one-class rows"));
    }
    Ok(feature_table(task, corpus, now)?
        .rows
        .into_iter()
        .filter_map(|r| r.label.map(|l| (r.id, (r.values, l))))
        .collect())
}

/// Fit a detector on the series of every video labeled organic.
pub fn fit_corpus_detector(corpus: &Corpus, config: &DetectorConfig) -> Result<AnomalyDetector> {
    let by_video = corpus.comments_by_video();
    let mut normal = Vec::new();
    for v in corpus.videos.iter().filter(|v| v.label == Some(Label::Other)) {
        if let Some(c) = by_video.get(v.video_id.as_str()) {
            normal.push(build_time_series(c, config.bin_width, config.mode)?);
        }
    }
    AnomalyDetector::fit(&normal, config)
}

/// Fused 7-vectors for every video of the corpus.
pub fn score_corpus(
    corpus: &Corpus,
    detector: &AnomalyDetector,
    embedder: &dyn EmbeddingProvider,
    window: usize,
    now: i64,
) -> Result<(FeatureTable, Vec<ScoredVideo>)> {
    let inputs = video_inputs(corpus, &detector.config, now)?;
    let scored = inputs
        .iter()
        .map(|i| score_video(i, detector, embedder, window))
        .collect::<Result<Vec<_>>>()?;
    let rows = scored
        .iter()
        .zip(&inputs)
        .map(|(s, i)| FeatureRow {
            id: i.video.video_id.clone(),
            label: i.video.label,
            values: s.fused.values.to_vec(),
        })
        .collect();
    let table = FeatureTable {
        names: FusedFeature::NAMES.iter().map(|s| s.to_string()).collect(),
        rows,
    };
    Ok((table, scored))
}

pub fn reference_time(p: &PipelineConfig, corpus: &Corpus) -> Result<i64> {
    p.reference_time
        .or_else(|| corpus.latest_timestamp())
        .ok_or_else(|| Error::InsufficientData("corpus has no timestamps".into()))
}

fn run_one_class(task: Task, corpus: &Corpus, config: &Config) -> Result<RunOutput> {
    let p = &config.pipeline;
    let mut clock = Clock {
        enabled: p.record_timings,
        totals: BTreeMap::new(),
    };
    let mut seeds = Seeds(BTreeMap::new());
    let now = reference_time(p, corpus)?;
    let rows = clock.time("features", || one_class_rows(task, corpus, now))?;
    let oracle = LabelOracle::new(rows.iter().map(|(id, (_, l))| (id.clone(), *l)).collect());
    let mut positives = Vec::new();
    for id in oracle.ids() {
        if oracle.read("select", &id)?.is_collusive() {
            positives.push(id);
        }
    }
    let split_seed = seeds.get(p.seed, "kfold");
    let splits = kfold_split(&positives, p.folds, split_seed)?;
    let models: Vec<String> = p.one_class_kinds.iter().map(|k| k.to_string()).collect();
    let mut folds = Vec::new();
    for split in &splits {
        let k = split.fold_index;
        let train: Vec<Vec<f64>> = split.train_ids.iter().map(|id| rows[id].0.clone()).collect();
        let mut metrics = BTreeMap::new();
        for &kind in &p.one_class_kinds {
            let mut params = p.one_class.clone();
            params.seed = seeds.get(p.seed, &format!("fold{k}/{kind}"));
            let model = clock.time(&format!("train/{kind}"), || train_one_class(&train, kind, &params))?;
            let predicted = split
                .test_ids
                .iter()
                .map(|id| score_one_class(&model, &rows[id].0).map(|s| s.is_inlier))
                .collect::<Result<Vec<bool>>>()?;
            let truth = vec![true; predicted.len()];
            metrics.insert(kind.to_string(), evaluate_tpr_only(&predicted, &truth)?);
        }
        folds.push(FoldReport {
            fold: k,
            n_train: split.train_ids.len(),
            n_test: split.test_ids.len(),
            metrics,
        });
    }
    let log = oracle.log();
    let mut report = empty_report(task, config);
    report.mean = fold_means(&models, &folds);
    report.models = models;
    report.folds = folds;
    report.seeds = seeds.0;
    report.timings = clock.finish();
    report.label_audit = Some(AuditSummary::of(&log));
    Ok(RunOutput {
        report,
        audit_log: log,
    })
}

/// Per-video inputs that do not depend on the fold.
pub struct VideoInputs<'a> {
    pub video: &'a VideoRecord,
    pub comments: Vec<&'a CommentRecord>,
    pub series: Option<TimeSeries>,
    pub metadata: VideoFeatures,
}

pub fn video_inputs<'a>(corpus: &'a Corpus, detector: &DetectorConfig, now: i64) -> Result<Vec<VideoInputs<'a>>> {
    let by_video = corpus.comments_by_video();
    corpus
        .videos
        .iter()
        .map(|v| {
            let comments = by_video.get(v.video_id.as_str()).cloned().unwrap_or_default();
            let series = if comments.is_empty() {
                None
            } else {
                Some(build_time_series(&comments, detector.bin_width, detector.mode)?)
            };
            Ok(VideoInputs {
                video: v,
                comments,
                series,
                metadata: extract_video_features(v, MetadataMode::NoViewRate, now)?,
            })
        })
        .collect()
}

/// Everything the detector and comment scorer derive for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredVideo {
    pub fused: FusedFeature,
    pub anomaly: AnomalyFeatures,
    pub comments: CommentFeatures,
    pub propagation: PropagationMetrics,
}

/// Score one video with a trained detector and build its fused vector.
pub fn score_video(
    input: &VideoInputs<'_>,
    detector: &AnomalyDetector,
    embedder: &dyn EmbeddingProvider,
    window: usize,
) -> Result<ScoredVideo> {
    let (anomaly, comments, propagation) = match &input.series {
        None => (AnomalyFeatures::default(), CommentFeatures::default(), PropagationMetrics::default()),
        Some(series) => {
            let scored = detector.score(series)?;
            let peaks = detector.peaks(&scored);
            let cf = comment_features(&input.comments, &peaks, series, Scorer::Embedding(embedder), window)?;
            (anomaly_features(&peaks), cf, propagation_metrics(&peaks, series, input.video))
        }
    };
    Ok(ScoredVideo {
        fused: fuse(&input.video.video_id, &input.metadata, &anomaly, &comments)?,
        anomaly,
        comments,
        propagation,
    })
}

struct FoldData {
    train_x: Vec<Vec<f64>>,
    train_y: Vec<bool>,
    test_x: Vec<Vec<f64>>,
    test_y: Vec<bool>,
}

fn dac_auc(data: &[FoldData], columns: &[usize], cfg: &DacConfig, seeds: &[u64]) -> Result<f64> {
    let mut total = 0.0;
    for (d, &seed) in data.iter().zip(seeds) {
        let cfg = DacConfig { seed, ..cfg.clone() };
        let labels: Vec<Option<bool>> = d.train_y.iter().map(|&y| Some(y)).collect();
        let model = train_dac(&select_columns(&d.train_x, columns), &labels, &cfg)?;
        let scores = select_columns(&d.test_x, columns)
            .iter()
            .map(|x| model.collusive_probability(x))
            .collect::<Result<Vec<f64>>>()?;
        total += crate::classifiers::roc_auc(&scores, &d.test_y)?;
    }
    Ok(total / data.len() as f64)
}

fn run_comments(corpus: &Corpus, config: &Config) -> Result<RunOutput> {
    let p = &config.pipeline;
    let mut clock = Clock {
        enabled: p.record_timings,
        totals: BTreeMap::new(),
    };
    let mut seeds = Seeds(BTreeMap::new());
    let now = reference_time(p, corpus)?;
    let inputs = clock.time("inputs", || video_inputs(corpus, &p.detector, now))?;
    let index: HashMap<&str, usize> = inputs.iter().enumerate().map(|(i, v)| (v.video.video_id.as_str(), i)).collect();
    let embed_seed = seeds.get(p.seed, "embedder");
    let embedder = CachingEmbedder::new(provider_from_spec(&p.embedder, embed_seed)?);

    let oracle = LabelOracle::new(
        corpus
            .videos
            .iter()
            .filter_map(|v| v.label.map(|l| (v.video_id.clone(), l)))
            .collect(),
    );
    let ids = oracle.ids();
    let split_seed = seeds.get(p.seed, "kfold");
    let splits: Vec<DatasetSplit> = if p.stratified {
        let labels = ids.iter().map(|id| oracle.read("split", id)).collect::<Result<Vec<_>>>()?;
        stratified_kfold_split(&ids, &labels, p.folds, split_seed)?
    } else {
        kfold_split(&ids, p.folds, split_seed)?
    };

    let mut models = vec!["dac".to_string()];
    if p.baselines {
        models.push("mlp".to_string());
    }
    let mut folds = Vec::new();
    let mut fold_data = Vec::new();
    let mut dac_seeds = Vec::new();
    let mut propagation_rows: Vec<(Label, PropagationMetrics)> = Vec::new();
    for split in &splits {
        let k = split.fold_index;
        oracle.open_fold(k, &split.test_ids);
        let mut normal = Vec::new();
        let mut train_y = Vec::new();
        for id in &split.train_ids {
            let collusive = oracle.read("anomaly-fit", id)?.is_collusive();
            train_y.push(collusive);
            if !collusive {
                if let Some(s) = &inputs[index[id.as_str()]].series {
                    normal.push(s.clone());
                }
            }
        }
        let mut det_cfg = p.detector.clone();
        det_cfg.gru.seed = seeds.get(p.seed, &format!("fold{k}/gru"));
        let detector = clock.time("train-anomaly", || AnomalyDetector::fit(&normal, &det_cfg))?;

        let score_all = |ids: &[String]| -> Result<Vec<ScoredVideo>> {
            ids.iter()
                .map(|id| {
                    let i = index[id.as_str()];
                    score_video(&inputs[i], &detector, &embedder, p.window)
                })
                .collect()
        };
        let train_scored = clock.time("score", || score_all(&split.train_ids))?;
        let test_scored = clock.time("score", || score_all(&split.test_ids))?;
        let train_x: Vec<Vec<f64>> = train_scored.iter().map(|s| s.fused.values.to_vec()).collect();
        let test_x: Vec<Vec<f64>> = test_scored.iter().map(|s| s.fused.values.to_vec()).collect();
        let train_labels: Vec<Option<bool>> = train_y.iter().map(|&y| Some(y)).collect();

        let dac_seed = seeds.get(p.seed, &format!("fold{k}/dac"));
        dac_seeds.push(dac_seed);
        let dac_cfg = DacConfig {
            seed: dac_seed,
            ..p.dac.clone()
        };
        let mut fold_models = vec![("dac", dac_cfg.clone())];
        if p.baselines {
            fold_models.push(("mlp", dac_cfg.mlp_baseline()));
        }
        let mut probs = Vec::new();
        for (name, cfg) in &fold_models {
            let model = clock.time(&format!("train/{name}"), || train_dac(&train_x, &train_labels, cfg))?;
            let s = test_x
                .iter()
                .map(|x| model.collusive_probability(x))
                .collect::<Result<Vec<f64>>>()?;
            probs.push(s);
        }

        // Every test item is scored; labels may be read from here on.
        oracle.unseal();
        let test_y = split
            .test_ids
            .iter()
            .map(|id| oracle.read("evaluate", id).map(Label::is_collusive))
            .collect::<Result<Vec<bool>>>()?;
        let mut metrics = BTreeMap::new();
        for ((name, _), s) in fold_models.iter().zip(&probs) {
            let predicted: Vec<bool> = s.iter().map(|&x| x >= p.decision_threshold).collect();
            metrics.insert(name.to_string(), evaluate(s, &predicted, &test_y)?);
        }
        for (sv, &y) in test_scored.iter().zip(&test_y) {
            let l = if y { Label::Collusive } else { Label::Other };
            propagation_rows.push((l, sv.propagation));
        }
        oracle.close_fold();
        folds.push(FoldReport {
            fold: k,
            n_train: split.train_ids.len(),
            n_test: split.test_ids.len(),
            metrics,
        });
        fold_data.push(FoldData {
            train_x,
            train_y,
            test_x,
            test_y,
        });
    }

    let importances = if p.importance {
        let data = &fold_data;
        let seeds_ref = &dac_seeds;
        let imp = clock.time("importance", || {
            feature_importance(&FusedFeature::NAMES, |cols| dac_auc(data, cols, &p.dac, seeds_ref))
        })?;
        Some(imp)
    } else {
        None
    };

    let split_by = |label: Label| -> Vec<PropagationMetrics> {
        propagation_rows.iter().filter(|(l, _)| *l == label).map(|(_, m)| *m).collect()
    };
    let propagation = PropagationTables {
        collusive: propagation_report(&split_by(Label::Collusive)),
        other: propagation_report(&split_by(Label::Other)),
    };

    let log = oracle.log();
    let mut report = empty_report(Task::Comments, config);
    report.mean = fold_means(&models, &folds);
    report.models = models;
    report.folds = folds;
    report.seeds = seeds.0;
    report.importances = importances;
    report.propagation = Some(propagation);
    report.timings = clock.finish();
    report.label_audit = Some(AuditSummary::of(&log));
    Ok(RunOutput {
        report,
        audit_log: log,
    })
}

/// Which one-class kinds a task report covers.
pub fn one_class_models(report: &RunReport) -> Vec<OneClassKind> {
    report.models.iter().filter_map(|m| m.parse().ok()).collect()
}
