//! Plain `key = value` run configuration. Every effective setting is
//! rendered back to the same format for report snapshots.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anomaly::{DetectorConfig, SeriesMode};
use crate::classifiers::{DacConfig, OneClassKind, OneClassParams};
use crate::error::{Error, Result};
use crate::synth::SyntheticConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub folds: usize,
    pub stratified: bool,
    pub detector: DetectorConfig,
    pub window: usize,
    pub embedder: String,
    pub dac: DacConfig,
    pub one_class: OneClassParams,
    pub one_class_kinds: Vec<OneClassKind>,
    /// Drop-one feature importance (retrains once per feature per fold).
    pub importance: bool,
    /// Train the MLP baseline next to the DAC.
    pub baselines: bool,
    pub decision_threshold: f64,
    pub record_timings: bool,
    /// Instant for view-rate ages; defaults to the corpus's latest timestamp.
    pub reference_time: Option<i64>,
    pub min_shared: usize,
    pub baseline_trials: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            folds: 5,
            stratified: true,
            detector: DetectorConfig::default(),
            window: crate::comments::DEFAULT_WINDOW,
            embedder: "hash".into(),
            dac: DacConfig::default(),
            one_class: OneClassParams::default(),
            one_class_kinds: OneClassKind::ALL.to_vec(),
            importance: true,
            baselines: true,
            decision_threshold: 0.5,
            record_timings: false,
            reference_time: None,
            min_shared: 1,
            baseline_trials: 30,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub pipeline: PipelineConfig,
    pub synth: SyntheticConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_pair<T: FromStr + Copy>(key: &str, value: &str) -> Result<(T, T)>
where
    T::Err: Display,
{
    match parse_list::<T>(key, value)?.as_slice() {
        [a] => Ok((*a, *a)),
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::Config(format!("{key} expects `lo, hi`"))),
    }
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn mode_str(m: SeriesMode) -> &'static str {
    match m {
        SeriesMode::Cumulative => "cumulative",
        SeriesMode::Increment => "increment",
    }
}

impl Config {
    /// Parse `key = value` lines; `#` starts a comment. Unknown keys are
    /// errors.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse_str(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.pipeline;
        let s = &mut self.synth;
        match key {
            "seed" => {
                p.seed = parse(key, v)?;
                s.seed = p.seed;
            }
            "folds" => p.folds = parse(key, v)?,
            "stratified" => p.stratified = parse(key, v)?,
            "window" => p.window = parse(key, v)?,
            "embedder" => p.embedder = v.to_string(),
            "importance" => p.importance = parse(key, v)?,
            "baselines" => p.baselines = parse(key, v)?,
            "decision_threshold" => p.decision_threshold = parse(key, v)?,
            "record_timings" => p.record_timings = parse(key, v)?,
            "reference_time" => p.reference_time = if v == "auto" { None } else { Some(parse(key, v)?) },
            "min_shared" => p.min_shared = parse(key, v)?,
            "baseline_trials" => p.baseline_trials = parse(key, v)?,
            "series.bin_width" => p.detector.bin_width = parse(key, v)?,
            "series.mode" => {
                p.detector.mode = match v {
                    "increment" => SeriesMode::Increment,
                    "cumulative" => SeriesMode::Cumulative,
                    _ => return Err(Error::Config(format!("series.mode must be increment or cumulative, got {v}"))),
                }
            }
            "detector.holdout_fraction" => p.detector.holdout_fraction = parse(key, v)?,
            "detector.height_quantile" => p.detector.height_quantile = parse(key, v)?,
            "detector.rel_height" => p.detector.rel_height = parse(key, v)?,
            "gru.hidden" => p.detector.gru.hidden = parse_list(key, v)?,
            "gru.horizon" => p.detector.gru.horizon = parse(key, v)?,
            "gru.learning_rate" => p.detector.gru.learning_rate = parse(key, v)?,
            "gru.epochs" => p.detector.gru.epochs = parse(key, v)?,
            "gru.bptt" => p.detector.gru.bptt = parse(key, v)?,
            "gru.grad_clip" => p.detector.gru.grad_clip = parse(key, v)?,
            "dac.hidden" => p.dac.hidden = parse(key, v)?,
            "dac.ae_epochs" => p.dac.ae_epochs = parse(key, v)?,
            "dac.clf_epochs" => p.dac.clf_epochs = parse(key, v)?,
            "dac.corruption" => p.dac.corruption = parse(key, v)?,
            "dac.learning_rate" => p.dac.learning_rate = parse(key, v)?,
            "dac.batch_size" => p.dac.batch_size = parse(key, v)?,
            "dac.recon_weight" => p.dac.recon_weight = parse(key, v)?,
            "oneclass.kinds" => p.one_class_kinds = parse_list(key, v)?,
            "oneclass.nu" => p.one_class.nu = parse(key, v)?,
            "oneclass.gamma" => p.one_class.gamma = if v == "auto" { None } else { Some(parse(key, v)?) },
            "oneclass.tolerance" => p.one_class.svm_tolerance = parse(key, v)?,
            "oneclass.n_trees" => p.one_class.n_trees = parse(key, v)?,
            "oneclass.subsample" => p.one_class.subsample = parse(key, v)?,
            "oneclass.support_fraction" => p.one_class.support_fraction = parse(key, v)?,
            "oneclass.k" => p.one_class.k = parse(key, v)?,
            "oneclass.contamination" => p.one_class.contamination = parse(key, v)?,
            "synth.n_collusive" => s.n_collusive = parse(key, v)?,
            "synth.n_organic" => s.n_organic = parse(key, v)?,
            "synth.organic_rate" => s.organic_rate = parse_pair(key, v)?,
            "synth.horizon_days" => s.horizon_days = parse(key, v)?,
            "synth.burst_count" => s.burst_count = parse_pair(key, v)?,
            "synth.burst_multiplier" => s.burst_multiplier = parse(key, v)?,
            "synth.burst_duration_days" => s.burst_duration_days = parse_pair(key, v)?,
            "synth.near_duplicate_prob" => s.near_duplicate_prob = parse(key, v)?,
            "synth.members" => s.members = parse(key, v)?,
            "synth.communities" => s.communities = parse(key, v)?,
            "synth.intra_community_prob" => s.intra_community_prob = parse(key, v)?,
            "synth.collusive_subscriptions" => s.collusive_subscriptions = parse_pair(key, v)?,
            "synth.general_subscribers" => s.general_subscribers = parse(key, v)?,
            "synth.organic_subscriptions" => s.organic_subscriptions = parse_pair(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every effective setting, keyed as in the config file.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let p = &self.pipeline;
        let s = &self.synth;
        let d = &p.detector;
        let g = &d.gru;
        let o = &p.one_class;
        let pair = |a: &dyn Display, b: &dyn Display| format!("{a},{b}");
        let entries: Vec<(&str, String)> = vec![
            ("seed", p.seed.to_string()),
            ("folds", p.folds.to_string()),
            ("stratified", p.stratified.to_string()),
            ("window", p.window.to_string()),
            ("embedder", p.embedder.clone()),
            ("importance", p.importance.to_string()),
            ("baselines", p.baselines.to_string()),
            ("decision_threshold", p.decision_threshold.to_string()),
            ("record_timings", p.record_timings.to_string()),
            ("reference_time", p.reference_time.map_or("auto".into(), |t| t.to_string())),
            ("min_shared", p.min_shared.to_string()),
            ("baseline_trials", p.baseline_trials.to_string()),
            ("series.bin_width", d.bin_width.to_string()),
            ("series.mode", mode_str(d.mode).into()),
            ("detector.holdout_fraction", d.holdout_fraction.to_string()),
            ("detector.height_quantile", d.height_quantile.to_string()),
            ("detector.rel_height", d.rel_height.to_string()),
            ("gru.hidden", join(&g.hidden)),
            ("gru.horizon", g.horizon.to_string()),
            ("gru.learning_rate", g.learning_rate.to_string()),
            ("gru.epochs", g.epochs.to_string()),
            ("gru.bptt", g.bptt.to_string()),
            ("gru.grad_clip", g.grad_clip.to_string()),
            ("dac.hidden", p.dac.hidden.to_string()),
            ("dac.ae_epochs", p.dac.ae_epochs.to_string()),
            ("dac.clf_epochs", p.dac.clf_epochs.to_string()),
            ("dac.corruption", p.dac.corruption.to_string()),
            ("dac.learning_rate", p.dac.learning_rate.to_string()),
            ("dac.batch_size", p.dac.batch_size.to_string()),
            ("dac.recon_weight", p.dac.recon_weight.to_string()),
            ("oneclass.kinds", join(&p.one_class_kinds)),
            ("oneclass.nu", o.nu.to_string()),
            ("oneclass.gamma", o.gamma.map_or("auto".into(), |g| g.to_string())),
            ("oneclass.tolerance", o.svm_tolerance.to_string()),
            ("oneclass.n_trees", o.n_trees.to_string()),
            ("oneclass.subsample", o.subsample.to_string()),
            ("oneclass.support_fraction", o.support_fraction.to_string()),
            ("oneclass.k", o.k.to_string()),
            ("oneclass.contamination", o.contamination.to_string()),
            ("synth.n_collusive", s.n_collusive.to_string()),
            ("synth.n_organic", s.n_organic.to_string()),
            ("synth.organic_rate", pair(&s.organic_rate.0, &s.organic_rate.1)),
            ("synth.horizon_days", s.horizon_days.to_string()),
            ("synth.burst_count", pair(&s.burst_count.0, &s.burst_count.1)),
            ("synth.burst_multiplier", s.burst_multiplier.to_string()),
            ("synth.burst_duration_days", pair(&s.burst_duration_days.0, &s.burst_duration_days.1)),
            ("synth.near_duplicate_prob", s.near_duplicate_prob.to_string()),
            ("synth.members", s.members.to_string()),
            ("synth.communities", s.communities.to_string()),
            ("synth.intra_community_prob", s.intra_community_prob.to_string()),
            ("synth.collusive_subscriptions", pair(&s.collusive_subscriptions.0, &s.collusive_subscriptions.1)),
            ("synth.general_subscribers", s.general_subscribers.to_string()),
            ("synth.organic_subscriptions", pair(&s.organic_subscriptions.0, &s.organic_subscriptions.1)),
        ];
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.snapshot().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
