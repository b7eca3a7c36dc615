//! Synthetic corpus generation with latent ground truth.
//!
//! The generator simulates per-user triage: sessions separated by strictly
//! more than the session gap threshold, message arrivals between sessions,
//! a first Read for every delivered message, deferral intent sampled at
//! read time (optionally driven by workload, body length, and meetings),
//! strategy actions at configured per-class rates, and strong actions either
//! inside the first-read session (immediate responders) or in a strictly
//! later session (completed deferrals).
//!
//! Because all aggregate behavior follows directly from the configuration,
//! a generated corpus doubles as the verification oracle for the
//! sessionizer, the labeler, the statistics, and the predictor.

mod calibrate;
mod config;
mod generate;

pub use calibrate::{
    check_calibration, default_calibration_targets, CalibrationReport, CalibrationRow,
    CalibrationTarget, TableKind, TargetStatus, Tolerance,
};
pub use config::{ClassProfile, MetaParams, SessionRates, StrategyRates, StyleMix, SynthConfig};
pub use generate::{generate, generate_with_plan};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::ActionType;
use crate::error::{Error, Result};

/// Latent intent behind a message's handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Intent {
    Deferred,
    NonDeferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthRecord {
    pub intent: Intent,
    /// For deferred intents: whether the planned strong action ever happens.
    /// Always false for non-deferred intents.
    pub completed: bool,
    /// Present exactly when `intent == Deferred && completed`.
    pub planned_strong_action: Option<ActionType>,
}

/// Ground truth per message id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub records: BTreeMap<String, TruthRecord>,
}

impl GroundTruth {
    pub fn get(&self, message_id: &str) -> Option<&TruthRecord> {
        self.records.get(message_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_intent(&self, intent: Intent) -> usize {
        self.records.values().filter(|r| r.intent == intent).count()
    }

    /// Deferred intents whose strong action materializes.
    pub fn count_completed_deferrals(&self) -> usize {
        self.records
            .values()
            .filter(|r| r.intent == Intent::Deferred && r.completed)
            .count()
    }
}

#[derive(Serialize, Deserialize)]
struct TruthLine {
    msg: String,
    intent: Intent,
    completed: bool,
}

pub fn write_truth(truth: &GroundTruth, mut w: impl std::io::Write) -> Result<()> {
    for (msg, rec) in &truth.records {
        let line = TruthLine {
            msg: msg.clone(),
            intent: rec.intent,
            completed: rec.completed,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_truth(reader: impl std::io::BufRead) -> Result<GroundTruth> {
    let mut truth = GroundTruth::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TruthLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: "truth.jsonl".to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        truth.records.insert(
            parsed.msg,
            TruthRecord {
                intent: parsed.intent,
                completed: parsed.completed,
                planned_strong_action: None,
            },
        );
    }
    Ok(truth)
}

/// The generator's own session plan, exposed for oracle tests: per user the
/// committed sessions as `(start_ts, end_ts, n_actions)`, plus the unhandled
/// count planted at each message's first read.
#[derive(Debug, Clone, Default)]
pub struct SynthPlan {
    pub sessions: BTreeMap<String, Vec<(i64, i64, usize)>>,
    pub unhandled_at_first_read: BTreeMap<String, u32>,
}
