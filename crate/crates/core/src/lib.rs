//! Mining email action logs for deferral behavior.
//!
//! The crate covers the full pipeline: ingesting (or synthesizing) per-user
//! action logs, segmenting them into inactivity-bounded sessions, labeling
//! messages as deferred or not, reproducing descriptive statistics with
//! bootstrap confidence intervals, and training a gradient-boosted-tree
//! classifier that predicts whether a triaged message will be returned to.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`corpus`] — log data model, JSONL ingestion, active-user filter
//! - [`synth`] — synthetic corpus generator with latent ground truth
//! - [`session`] — inactivity-gap sessionization
//! - [`label`] — per-message deferral labels
//! - [`stats`] — descriptive statistics and bootstrap intervals
//! - [`features`] — feature extraction and dataset assembly
//! - [`gbdt`] — gradient boosted decision trees (weighted logistic loss)
//! - [`experiments`] — cohort construction, baselines, and evaluation

pub mod corpus;
pub mod error;
pub mod experiments;
pub mod features;
pub mod gbdt;
pub mod label;
pub mod session;
pub mod stats;
pub mod synth;
pub mod workload;

pub(crate) mod util;

pub use error::{Error, Result};
