//! Calibration targets and the report comparing generated statistics
//! against them.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::Result;
use crate::label::{label_corpus, SignalWindow};
use crate::session::{sessionize, DEFAULT_GAP_THRESHOLD_SECS};
use crate::stats::{
    action_probabilities, headline_stats, property_comparison, replied_comparison, CiConfig,
    StatTable,
};
use crate::synth::{GroundTruth, Intent};

/// Reference values the default configuration is calibrated to reproduce on
/// labeled classes.
pub mod targets {
    pub const RECIPIENTS_DEFERRED: f64 = 3.899;
    pub const RECIPIENTS_NON_DEFERRED: f64 = 7.010;
    pub const RECIPIENTS_REPLIED_TO: f64 = 3.497;
    pub const ACTION_REQUEST_DEFERRED: f64 = 0.075;
    pub const ACTION_REQUEST_NON_DEFERRED: f64 = 0.034;
    pub const REPLY_REQUEST_DEFERRED: f64 = 0.200;
    pub const REPLY_REQUEST_NON_DEFERRED: f64 = 0.100;
    pub const HUMAN_DEFERRED: f64 = 0.849;
    pub const HUMAN_NON_DEFERRED: f64 = 0.744;
    pub const KNOWN_DEFERRED: f64 = 0.604;
    pub const KNOWN_NON_DEFERRED: f64 = 0.723;
    pub const IMPORTANT_DEFERRED: f64 = 0.469;
    pub const IMPORTANT_NON_DEFERRED: f64 = 0.403;
    pub const FLAG_DEFERRED: f64 = 0.036;
    pub const FLAG_NON_DEFERRED: f64 = 0.009;
    pub const MARK_UNREAD_DEFERRED: f64 = 0.053;
    pub const MARK_UNREAD_NON_DEFERRED: f64 = 0.011;
    pub const MARK_UNREAD_REPLIED_TO: f64 = 0.013;
    pub const MOVE_DEFERRED_READ: f64 = 0.015;
    pub const MOVE_DEFERRED_REVISIT: f64 = 0.086;
    pub const MESSAGE_DEFERRAL_RATE: f64 = 0.03;
}

/// Which computed table a target reads its measured value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableKind {
    Headline,
    Property,
    Actions,
    ActionsBySessionKind,
    Replied,
    /// Intent-level deferral rate from ground truth rather than labels.
    IntentDeferralRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tolerance {
    /// Pass when the bootstrap interval of the measured statistic contains
    /// the target.
    CiContains,
    /// Pass when |measured - target| is at most the given bound.
    Abs(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub name: String,
    pub table: TableKind,
    pub group: String,
    pub statistic: String,
    pub target: f64,
    pub tolerance: Tolerance,
}

impl CalibrationTarget {
    fn new(
        name: &str,
        table: TableKind,
        group: &str,
        statistic: &str,
        target: f64,
    ) -> CalibrationTarget {
        CalibrationTarget {
            name: name.to_string(),
            table,
            group: group.to_string(),
            statistic: statistic.to_string(),
            target,
            tolerance: Tolerance::CiContains,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetStatus {
    Pass,
    Fail,
    InsufficientData,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub name: String,
    pub target: f64,
    pub measured: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub status: TargetStatus,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub rows: Vec<CalibrationRow>,
}

impl CalibrationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.status == TargetStatus::Pass)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let name_w = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain(["target".len()])
            .max()
            .unwrap_or(6);
        out.push_str(&format!(
            "{:<name_w$}  {:>9}  {:>9}  {:>9}  {:>9}  status\n",
            "target", "value", "measured", "ci_low", "ci_high"
        ));
        for r in &self.rows {
            let measured = r
                .measured
                .map_or("-".to_string(), |m| format!("{m:.4}"));
            let status = match r.status {
                TargetStatus::Pass => "pass",
                TargetStatus::Fail => "FAIL",
                TargetStatus::InsufficientData => "insufficient data",
            };
            out.push_str(&format!(
                "{:<name_w$}  {:>9.4}  {:>9}  {:>9.4}  {:>9.4}  {}\n",
                r.name, r.target, measured, r.ci_low, r.ci_high, status
            ));
        }
        out
    }
}

/// The default target set: the statistics the calibrated configuration is
/// built to reproduce.
pub fn default_calibration_targets() -> Vec<CalibrationTarget> {
    use TableKind::*;
    vec![
        CalibrationTarget::new(
            "recipients_mean/deferred",
            Property,
            "deferred",
            "recipients_mean",
            targets::RECIPIENTS_DEFERRED,
        ),
        CalibrationTarget::new(
            "recipients_mean/non_deferred",
            Property,
            "non_deferred",
            "recipients_mean",
            targets::RECIPIENTS_NON_DEFERRED,
        ),
        CalibrationTarget::new(
            "flag/deferred",
            Actions,
            "deferred",
            "Flag",
            targets::FLAG_DEFERRED,
        ),
        CalibrationTarget::new(
            "flag/non_deferred",
            Actions,
            "non_deferred",
            "Flag",
            targets::FLAG_NON_DEFERRED,
        ),
        CalibrationTarget::new(
            "mark_unread/deferred",
            Actions,
            "deferred",
            "MarkAsUnread",
            targets::MARK_UNREAD_DEFERRED,
        ),
        CalibrationTarget::new(
            "mark_unread/non_deferred",
            Actions,
            "non_deferred",
            "MarkAsUnread",
            targets::MARK_UNREAD_NON_DEFERRED,
        ),
        CalibrationTarget::new(
            "move/deferred_read",
            ActionsBySessionKind,
            "deferred_read",
            "Move",
            targets::MOVE_DEFERRED_READ,
        ),
        CalibrationTarget::new(
            "move/deferred_revisit",
            ActionsBySessionKind,
            "deferred_revisit",
            "Move",
            targets::MOVE_DEFERRED_REVISIT,
        ),
        CalibrationTarget::new(
            "replied_to/mark_unread",
            Replied,
            "replied_to",
            "mark_unread_rate",
            targets::MARK_UNREAD_REPLIED_TO,
        ),
        CalibrationTarget::new(
            "replied_to/recipients_mean",
            Replied,
            "replied_to",
            "recipients_mean",
            targets::RECIPIENTS_REPLIED_TO,
        ),
        CalibrationTarget::new(
            "message_deferral_rate",
            Headline,
            "corpus",
            "message_deferral_rate",
            targets::MESSAGE_DEFERRAL_RATE,
        ),
    ]
}

/// Measures the target statistics on a generated corpus and reports
/// pass/fail per target. Targets whose statistic cannot be computed (empty
/// class, empty corpus) are reported as insufficient data.
pub fn check_calibration(
    corpus: &Corpus,
    truth: &GroundTruth,
    target_list: &[CalibrationTarget],
    ci: &CiConfig,
) -> Result<CalibrationReport> {
    let sessions = sessionize(corpus, DEFAULT_GAP_THRESHOLD_SECS)?;
    let labels = label_corpus(corpus, &sessions, SignalWindow::ReadSession)?;

    let headline = headline_stats(&labels, &sessions, corpus, TriageRule::default(), ci);
    let property = property_comparison(&labels, corpus, ci);
    let actions = action_probabilities(&labels, &sessions, corpus, false, ci);
    let actions_split = action_probabilities(&labels, &sessions, corpus, true, ci);
    let replied = replied_comparison(&labels, corpus, ci);

    let lookup = |table: &StatTable, t: &CalibrationTarget| {
        table
            .get(&t.group, &t.statistic)
            .map(|r| (r.value, r.ci_low, r.ci_high))
    };

    let mut report = CalibrationReport::default();
    for t in target_list {
        let measured = match t.table {
            TableKind::Headline => lookup(&headline, t),
            TableKind::Property => lookup(&property, t),
            TableKind::Actions => lookup(&actions, t),
            TableKind::ActionsBySessionKind => lookup(&actions_split, t),
            TableKind::Replied => lookup(&replied, t),
            TableKind::IntentDeferralRate => {
                if truth.is_empty() {
                    None
                } else {
                    let rate =
                        truth.count_intent(Intent::Deferred) as f64 / truth.len() as f64;
                    Some((rate, rate, rate))
                }
            }
        };
        let row = match measured {
            None => CalibrationRow {
                name: t.name.clone(),
                target: t.target,
                measured: None,
                ci_low: f64::NAN,
                ci_high: f64::NAN,
                status: TargetStatus::InsufficientData,
            },
            Some((value, lo, hi)) => {
                let pass = match t.tolerance {
                    Tolerance::CiContains => lo <= t.target && t.target <= hi,
                    Tolerance::Abs(eps) => (value - t.target).abs() <= eps,
                };
                CalibrationRow {
                    name: t.name.clone(),
                    target: t.target,
                    measured: Some(value),
                    ci_low: lo,
                    ci_high: hi,
                    status: if pass { TargetStatus::Pass } else { TargetStatus::Fail },
                }
            }
        };
        report.rows.push(row);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::CiConfig;

    #[test]
    fn empty_corpus_reports_insufficient_data() {
        let corpus = Corpus::default();
        let truth = GroundTruth::default();
        let report = check_calibration(
            &corpus,
            &truth,
            &default_calibration_targets(),
            &CiConfig {
                resamples: 100,
                ..CiConfig::default()
            },
        )
        .unwrap();
        assert!(!report.rows.is_empty());
        assert!(report
            .rows
            .iter()
            .all(|r| r.status == TargetStatus::InsufficientData));
        assert!(!report.all_pass());
        let text = report.render_text();
        assert!(text.contains("insufficient data"));
    }
}
