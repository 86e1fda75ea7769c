//! Detection of collusive engagement on video platforms.
//!
//! The crate covers the full pipeline: ingestion of platform records,
//! static metadata features, temporal anomaly features from a recurrent
//! predictor, comment-similarity features, a denoising-autoencoder
//! classifier, a one-class classifier suite, channel-graph analytics, and a
//! seeded synthetic corpus generator for end-to-end validation.

pub mod analytics;
pub mod artifact;
pub mod anomaly;
pub mod classifiers;
pub mod comments;
pub mod config;
pub mod error;
pub mod metadata;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
