//! Descriptive statistics over a labeled, sessionized corpus.
//!
//! Every reported value is a per-message mean (probabilities are means of
//! 0/1 indicators), with percentile-bootstrap confidence intervals resampled
//! at the message level. Classes with no members are omitted from the table
//! with a note instead of emitting NaN rows.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike};

use crate::corpus::{ActionType, Corpus};
use crate::label::{DeferralClass, LabelSet};
use crate::session::Sessions;
use crate::stats::{bootstrap_mean_ci, CiConfig, StatRow, StatTable};
use crate::util::{hash_str, mix_seed};
use crate::workload::WorkloadIndex;

pub const GROUP_DEFERRED: &str = "deferred";
pub const GROUP_NON_DEFERRED: &str = "non_deferred";
pub const GROUP_REPLIED_TO: &str = "replied_to";
pub const GROUP_BASELINE: &str = "baseline";

/// Default unhandled-count bucket edges; the last edge opens an unbounded
/// bucket.
pub const DEFAULT_WORKLOAD_BUCKETS: [u32; 7] = [0, 1, 2, 4, 8, 16, 32];
pub const DEFAULT_MEETING_BUCKETS: [u32; 7] = [0, 1, 2, 3, 4, 5, 6];

fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

fn push_mean_row(
    table: &mut StatTable,
    group: &str,
    statistic: &str,
    samples: &[f64],
    ci: &CiConfig,
) {
    if samples.is_empty() {
        table
            .notes
            .push(format!("{group}/{statistic}: no samples, row omitted"));
        return;
    }
    let seed = mix_seed(
        ci.seed,
        hash_str(&table.name) ^ hash_str(group).rotate_left(17) ^ hash_str(statistic).rotate_left(31),
    );
    let (lo, hi) = bootstrap_mean_ci(samples, ci.resamples, ci.alpha, seed);
    table.rows.push(StatRow {
        group: group.to_string(),
        statistic: statistic.to_string(),
        value: mean(samples),
        ci_low: lo,
        ci_high: hi,
    });
}

/// First-read timestamps keyed by message id, for messages that were read.
fn first_read_ts(corpus: &Corpus) -> BTreeMap<&str, i64> {
    let mut out: BTreeMap<&str, i64> = BTreeMap::new();
    for a in &corpus.actions {
        if a.action == ActionType::Read {
            out.entry(a.message_id.as_str())
                .and_modify(|ts| *ts = (*ts).min(a.timestamp))
                .or_insert(a.timestamp);
        }
    }
    out
}

/// What qualifies a session as a triage session. The default is the weakest
/// reading; the stricter variant lets the headline statistic's sensitivity
/// to the definition be reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriageRule {
    /// The session contains at least one first read.
    #[default]
    FirstRead,
    /// The session contains a first read of a message delivered after the
    /// end of the user's previous session (fresh mail).
    FreshFirstRead,
}

/// Headline prevalence statistics:
///
/// - `users_deferring_daily_frac`: fraction of users with at least one
///   deferred message per weekday (UTC, Monday-Friday), averaged over the
///   weekdays spanned by the corpus. A deferral is attributed to the day of
///   the message's first read.
/// - `message_deferral_rate`: deferred / (deferred + non-deferred).
/// - `triage_sessions_with_deferral_frac`: fraction of triage sessions
///   (per `triage_rule`) whose first reads include a message later labeled
///   deferred.
pub fn headline_stats(
    labels: &LabelSet,
    sessions: &Sessions,
    corpus: &Corpus,
    triage_rule: TriageRule,
    ci: &CiConfig,
) -> StatTable {
    let mut table = StatTable::new("headline");
    let reads = first_read_ts(corpus);

    // (a) daily deferring-user fraction over weekdays.
    if corpus.actions.is_empty() {
        table
            .notes
            .push("users_deferring_daily_frac: empty corpus, row omitted".to_string());
    } else {
        let total_users = corpus.user_ids().len();
        let day_of = |ts: i64| DateTime::from_timestamp(ts, 0).expect("valid ts").date_naive();
        let first_day = day_of(corpus.actions.iter().map(|a| a.timestamp).min().unwrap());
        let last_day = day_of(corpus.actions.iter().map(|a| a.timestamp).max().unwrap());

        let mut deferring: BTreeMap<chrono::NaiveDate, std::collections::BTreeSet<&str>> =
            BTreeMap::new();
        for l in labels.iter() {
            if l.label != DeferralClass::Deferred {
                continue;
            }
            if let Some(&ts) = reads.get(l.message_id.as_str()) {
                let user = corpus.messages[&l.message_id].user_id.as_str();
                deferring.entry(day_of(ts)).or_default().insert(user);
            }
        }

        let mut day_fracs = Vec::new();
        let mut day = first_day;
        while day <= last_day {
            if day.weekday().num_days_from_monday() < 5 {
                let n = deferring.get(&day).map_or(0, |s| s.len());
                day_fracs.push(n as f64 / total_users as f64);
            }
            day = day.succ_opt().expect("date in range");
        }
        if day_fracs.is_empty() {
            table.notes.push(
                "users_deferring_daily_frac: corpus spans zero weekdays, undefined".to_string(),
            );
        } else {
            push_mean_row(&mut table, "corpus", "users_deferring_daily_frac", &day_fracs, ci);
        }
    }

    // (b) message-level deferral rate.
    let labeled: Vec<f64> = labels
        .iter()
        .filter(|l| l.label != DeferralClass::NeverRead)
        .map(|l| f64::from(l.label == DeferralClass::Deferred))
        .collect();
    push_mean_row(&mut table, "corpus", "message_deferral_rate", &labeled, ci);

    // (c) triage sessions witnessing a deferral.
    let mut triage: BTreeMap<(&str, usize), bool> = BTreeMap::new();
    for l in labels.iter() {
        let Some(ordinal) = l.first_read_session else {
            continue;
        };
        let meta = &corpus.messages[&l.message_id];
        let user = meta.user_id.as_str();
        let qualifies = match triage_rule {
            TriageRule::FirstRead => true,
            TriageRule::FreshFirstRead => {
                let prev_end = (ordinal > 0)
                    .then(|| sessions.get(user, ordinal - 1).map(|s| s.end_ts))
                    .flatten();
                prev_end.is_none_or(|end| meta.delivery_time > end)
            }
        };
        if qualifies {
            let witnessed = triage.entry((user, ordinal)).or_insert(false);
            *witnessed |= l.label == DeferralClass::Deferred;
        }
    }
    let triage_samples: Vec<f64> = triage.values().map(|&w| f64::from(w)).collect();
    push_mean_row(
        &mut table,
        "corpus",
        "triage_sessions_with_deferral_frac",
        &triage_samples,
        ci,
    );

    table
}

const PROPERTY_STATS: [&str; 6] = [
    "recipients_mean",
    "action_request_rate",
    "reply_request_rate",
    "human_sender_rate",
    "known_sender_rate",
    "important_sender_rate",
];

/// Message-property means per deferral class.
pub fn property_comparison(labels: &LabelSet, corpus: &Corpus, ci: &CiConfig) -> StatTable {
    let mut table = StatTable::new("property_comparison");
    for (group, class) in [
        (GROUP_DEFERRED, DeferralClass::Deferred),
        (GROUP_NON_DEFERRED, DeferralClass::NonDeferred),
    ] {
        let metas: Vec<_> = labels
            .iter()
            .filter(|l| l.label == class)
            .map(|l| &corpus.messages[&l.message_id])
            .collect();
        if metas.is_empty() {
            table.notes.push(format!("class {group} empty; rows omitted"));
            continue;
        }
        let columns: [Vec<f64>; 6] = [
            metas.iter().map(|m| f64::from(m.num_recipients)).collect(),
            metas.iter().map(|m| f64::from(m.is_action_request)).collect(),
            metas.iter().map(|m| f64::from(m.is_reply_request)).collect(),
            metas.iter().map(|m| f64::from(m.is_human_sender)).collect(),
            metas.iter().map(|m| f64::from(m.is_known_sender)).collect(),
            metas.iter().map(|m| f64::from(m.is_important_sender)).collect(),
        ];
        for (stat, samples) in PROPERTY_STATS.iter().zip(columns.iter()) {
            push_mean_row(&mut table, group, stat, samples, ci);
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Window {
    Any,
    Read,
    Revisit,
}

/// Per-message action observation flags: for each action type, whether at
/// least one record exists at all / in the first-read session / in a later
/// session.
fn observation_flags<'c>(
    labels: &'c LabelSet,
    sessions: &Sessions,
    corpus: &'c Corpus,
) -> BTreeMap<&'c str, [[bool; 12]; 3]> {
    let mut flags: BTreeMap<&str, [[bool; 12]; 3]> = BTreeMap::new();
    let action_index = |a: ActionType| ActionType::ALL.iter().position(|&t| t == a).unwrap();
    for a in &corpus.actions {
        let Some(label) = labels.get(&a.message_id) else {
            continue;
        };
        let entry = flags.entry(a.message_id.as_str()).or_default();
        let idx = action_index(a.action);
        entry[0][idx] = true;
        if let Some(read_ordinal) = label.first_read_session {
            if let Some(ordinal) = sessions.ordinal_at(&a.user_id, a.timestamp) {
                if ordinal == read_ordinal {
                    entry[1][idx] = true;
                } else if ordinal > read_ordinal {
                    entry[2][idx] = true;
                }
            }
        }
    }
    flags
}

/// Probability of observing each non-strong action on a message given its
/// class. With `split_by_session_kind`, conditions further on whether the
/// record falls in the message's first-read session or in a later (revisit)
/// session.
pub fn action_probabilities(
    labels: &LabelSet,
    sessions: &Sessions,
    corpus: &Corpus,
    split_by_session_kind: bool,
    ci: &CiConfig,
) -> StatTable {
    let name = if split_by_session_kind {
        "action_probabilities_by_session_kind"
    } else {
        "action_probabilities"
    };
    let mut table = StatTable::new(name);
    let flags = observation_flags(labels, sessions, corpus);
    let action_index = |a: ActionType| ActionType::ALL.iter().position(|&t| t == a).unwrap();

    let windows: &[(&str, Window)] = if split_by_session_kind {
        &[("read", Window::Read), ("revisit", Window::Revisit)]
    } else {
        &[("", Window::Any)]
    };

    for (group_base, class) in [
        (GROUP_DEFERRED, DeferralClass::Deferred),
        (GROUP_NON_DEFERRED, DeferralClass::NonDeferred),
    ] {
        let members: Vec<&str> = labels
            .iter()
            .filter(|l| l.label == class)
            .map(|l| l.message_id.as_str())
            .collect();
        if members.is_empty() {
            table
                .notes
                .push(format!("class {group_base} empty; rows omitted"));
            continue;
        }
        for (suffix, window) in windows {
            let group = if suffix.is_empty() {
                group_base.to_string()
            } else {
                format!("{group_base}_{suffix}")
            };
            let slot = match window {
                Window::Any => 0,
                Window::Read => 1,
                Window::Revisit => 2,
            };
            for action in ActionType::STRATEGY {
                let idx = action_index(action);
                let samples: Vec<f64> = members
                    .iter()
                    .map(|m| f64::from(flags.get(m).map_or(false, |f| f[slot][idx])))
                    .collect();
                push_mean_row(&mut table, &group, action.as_str(), &samples, ci);
            }
        }
    }
    table
}

/// Workload proxy used by [`workload_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadMetric {
    /// Unhandled messages (delivered, not yet acted on) at first read.
    UnhandledMessages,
    /// Meetings in the calendar slot containing the first read.
    Meetings,
}

impl WorkloadMetric {
    fn as_str(self) -> &'static str {
        match self {
            WorkloadMetric::UnhandledMessages => "unhandled_messages",
            WorkloadMetric::Meetings => "meetings",
        }
    }
}

/// Deferral probability bucketed by workload at first read, plus the
/// unconditional baseline rate. `bucket_edges` must be strictly increasing;
/// the last edge opens an unbounded bucket. Empty buckets are omitted.
pub fn workload_curve(
    labels: &LabelSet,
    sessions: &Sessions,
    corpus: &Corpus,
    metric: WorkloadMetric,
    bucket_edges: &[u32],
    ci: &CiConfig,
) -> StatTable {
    let mut table = StatTable::new(format!("workload_curve_{}", metric.as_str()));
    let _ = sessions;
    let reads = first_read_ts(corpus);
    let index = WorkloadIndex::new(corpus);

    let mut bucket_samples: Vec<Vec<f64>> = vec![Vec::new(); bucket_edges.len()];
    let mut all: Vec<f64> = Vec::new();
    for l in labels.iter() {
        if l.label == DeferralClass::NeverRead {
            continue;
        }
        let Some(&ts) = reads.get(l.message_id.as_str()) else {
            continue;
        };
        let x = match metric {
            WorkloadMetric::UnhandledMessages => index
                .unhandled_count(&l.message_id, ts)
                .expect("labeled message is in corpus"),
            WorkloadMetric::Meetings => {
                let user = corpus.messages[&l.message_id].user_id.as_str();
                corpus
                    .calendar_slot_at(user, ts)
                    .map_or(0, |slot| slot.num_meetings)
            }
        };
        let y = f64::from(l.label == DeferralClass::Deferred);
        all.push(y);
        let bucket = bucket_edges.partition_point(|&e| e <= x);
        if bucket > 0 {
            bucket_samples[bucket - 1].push(y);
        }
    }

    for (i, samples) in bucket_samples.iter().enumerate() {
        let label = if i + 1 < bucket_edges.len() {
            format!("[{},{})", bucket_edges[i], bucket_edges[i + 1])
        } else {
            format!("[{},inf)", bucket_edges[i])
        };
        if samples.is_empty() {
            table.notes.push(format!("bucket {label} empty; omitted"));
            continue;
        }
        push_mean_row(&mut table, &label, "deferral_rate", samples, ci);
    }
    push_mean_row(&mut table, GROUP_BASELINE, "deferral_rate", &all, ci);
    table
}

/// Three-way comparison of deferred, non-deferred, and replied-to messages
/// (any message with a strong action at any time, excluding never-read
/// ones).
pub fn replied_comparison(labels: &LabelSet, corpus: &Corpus, ci: &CiConfig) -> StatTable {
    let mut table = StatTable::new("replied_comparison");

    let mut any_strong: BTreeMap<&str, bool> = BTreeMap::new();
    let mut any_mark_unread: BTreeMap<&str, bool> = BTreeMap::new();
    for a in &corpus.actions {
        if a.action.is_strong() {
            any_strong.insert(a.message_id.as_str(), true);
        }
        if a.action == ActionType::MarkAsUnread {
            any_mark_unread.insert(a.message_id.as_str(), true);
        }
    }

    let member_ids = |group: &str| -> Vec<&str> {
        labels
            .iter()
            .filter(|l| match group {
                GROUP_DEFERRED => l.label == DeferralClass::Deferred,
                GROUP_NON_DEFERRED => l.label == DeferralClass::NonDeferred,
                _ => {
                    l.label != DeferralClass::NeverRead
                        && any_strong.contains_key(l.message_id.as_str())
                }
            })
            .map(|l| l.message_id.as_str())
            .collect()
    };

    for group in [GROUP_DEFERRED, GROUP_NON_DEFERRED, GROUP_REPLIED_TO] {
        let members = member_ids(group);
        if members.is_empty() {
            table.notes.push(format!("class {group} empty; rows omitted"));
            continue;
        }
        let mark_unread: Vec<f64> = members
            .iter()
            .map(|m| f64::from(any_mark_unread.contains_key(m)))
            .collect();
        let recipients: Vec<f64> = members
            .iter()
            .map(|m| f64::from(corpus.messages[*m].num_recipients))
            .collect();
        push_mean_row(&mut table, group, "mark_unread_rate", &mark_unread, ci);
        push_mean_row(&mut table, group, "recipients_mean", &recipients, ci);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ActionRecord, MessageMeta};
    use crate::label::{label_corpus, SignalWindow};
    use crate::session::sessionize;

    fn meta(msg: &str, user: &str, recipients: u32, action_req: bool) -> MessageMeta {
        MessageMeta {
            message_id: msg.to_string(),
            user_id: user.to_string(),
            delivery_time: 0,
            unique_body_length: 10,
            num_recipients: recipients,
            is_bulk: false,
            is_in_thread: false,
            is_human_sender: true,
            is_same_org: false,
            is_known_sender: false,
            is_important_sender: false,
            is_action_request: action_req,
            is_reply_request: false,
        }
    }

    fn quick_ci() -> CiConfig {
        CiConfig {
            resamples: 100,
            alpha: 0.05,
            seed: 1,
        }
    }

    /// Four messages: m1 deferred (read then later reply), m2/m3/m4
    /// non-deferred.
    fn hand_corpus() -> Corpus {
        let mut messages = BTreeMap::new();
        messages.insert("m1".to_string(), meta("m1", "u1", 2, true));
        messages.insert("m2".to_string(), meta("m2", "u1", 4, false));
        messages.insert("m3".to_string(), meta("m3", "u1", 6, false));
        messages.insert("m4".to_string(), meta("m4", "u1", 8, true));
        let mk = |msg: &str, action, ts| ActionRecord {
            user_id: "u1".to_string(),
            message_id: msg.to_string(),
            action,
            timestamp: ts,
        };
        let actions = vec![
            mk("m1", ActionType::Read, 100),
            mk("m2", ActionType::Read, 150),
            mk("m2", ActionType::Reply, 160),
            mk("m3", ActionType::Read, 200),
            mk("m4", ActionType::Read, 210),
            mk("m4", ActionType::MarkAsUnread, 220),
            mk("m1", ActionType::Reply, 5000),
            mk("m1", ActionType::Move, 5010),
        ];
        Corpus::new(actions, messages, Default::default()).unwrap()
    }

    fn labeled(corpus: &Corpus) -> (LabelSet, Sessions) {
        let sessions = sessionize(corpus, 600).unwrap();
        let labels = label_corpus(corpus, &sessions, SignalWindow::ReadSession).unwrap();
        (labels, sessions)
    }

    #[test]
    fn property_comparison_matches_hand_arithmetic() {
        let corpus = hand_corpus();
        let (labels, _) = labeled(&corpus);
        let t = property_comparison(&labels, &corpus, &quick_ci());
        // Deferred = {m1}: recipients 2, action_request 1.
        assert_eq!(t.value(GROUP_DEFERRED, "recipients_mean"), Some(2.0));
        assert_eq!(t.value(GROUP_DEFERRED, "action_request_rate"), Some(1.0));
        // NonDeferred = {m2, m3, m4}: recipients (4+6+8)/3 = 6.
        assert_eq!(t.value(GROUP_NON_DEFERRED, "recipients_mean"), Some(6.0));
        assert!(
            (t.value(GROUP_NON_DEFERRED, "action_request_rate").unwrap() - 1.0 / 3.0).abs() < 1e-12
        );
        for r in &t.rows {
            assert!(r.ci_low <= r.value && r.value <= r.ci_high);
        }
    }

    #[test]
    fn action_probabilities_split_by_window() {
        let corpus = hand_corpus();
        let (labels, sessions) = labeled(&corpus);
        let t = action_probabilities(&labels, &sessions, &corpus, false, &quick_ci());
        // MarkAsUnread observed only on m4 (non-deferred, 1/3).
        assert!((t.value(GROUP_NON_DEFERRED, "MarkAsUnread").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(t.value(GROUP_DEFERRED, "MarkAsUnread"), Some(0.0));
        // Move observed on m1 (deferred).
        assert_eq!(t.value(GROUP_DEFERRED, "Move"), Some(1.0));

        let split = action_probabilities(&labels, &sessions, &corpus, true, &quick_ci());
        // m1's Move happened in the revisit session.
        assert_eq!(split.value("deferred_read", "Move"), Some(0.0));
        assert_eq!(split.value("deferred_revisit", "Move"), Some(1.0));
        assert_eq!(split.value("non_deferred_read", "MarkAsUnread"), Some(1.0 / 3.0));
    }

    #[test]
    fn no_flag_actions_yield_zero_probability() {
        let corpus = hand_corpus();
        let (labels, sessions) = labeled(&corpus);
        let t = action_probabilities(&labels, &sessions, &corpus, false, &quick_ci());
        assert_eq!(t.value(GROUP_DEFERRED, "Flag"), Some(0.0));
        assert_eq!(t.value(GROUP_NON_DEFERRED, "Flag"), Some(0.0));
    }

    #[test]
    fn replied_comparison_matches_hand_arithmetic() {
        let corpus = hand_corpus();
        let (labels, _) = labeled(&corpus);
        let t = replied_comparison(&labels, &corpus, &quick_ci());
        // RepliedTo = {m1, m2}: recipients (2+4)/2 = 3, no MarkAsUnread.
        assert_eq!(t.value(GROUP_REPLIED_TO, "recipients_mean"), Some(3.0));
        assert_eq!(t.value(GROUP_REPLIED_TO, "mark_unread_rate"), Some(0.0));
        assert!((t.value(GROUP_NON_DEFERRED, "mark_unread_rate").unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn replied_comparison_notes_missing_strong_actions() {
        let mut messages = BTreeMap::new();
        messages.insert("m1".to_string(), meta("m1", "u1", 2, false));
        let actions = vec![ActionRecord {
            user_id: "u1".to_string(),
            message_id: "m1".to_string(),
            action: ActionType::Read,
            timestamp: 100,
        }];
        let corpus = Corpus::new(actions, messages, Default::default()).unwrap();
        let (labels, _) = labeled(&corpus);
        let t = replied_comparison(&labels, &corpus, &quick_ci());
        assert!(t.value(GROUP_REPLIED_TO, "recipients_mean").is_none());
        assert!(t.notes.iter().any(|n| n.contains(GROUP_REPLIED_TO)));
    }

    #[test]
    fn headline_zero_deferrals_is_all_zero() {
        let mut messages = BTreeMap::new();
        messages.insert("m1".to_string(), meta("m1", "u1", 2, false));
        // 2018-05-07 is a Monday.
        let monday = 1525687200;
        let actions = vec![ActionRecord {
            user_id: "u1".to_string(),
            message_id: "m1".to_string(),
            action: ActionType::Read,
            timestamp: monday,
        }];
        let corpus = Corpus::new(
            actions,
            {
                let mut m = messages.clone();
                m.get_mut("m1").unwrap().delivery_time = monday - 100;
                m
            },
            Default::default(),
        )
        .unwrap();
        let (labels, sessions) = labeled(&corpus);
        let t = headline_stats(&labels, &sessions, &corpus, TriageRule::default(), &quick_ci());
        assert_eq!(t.value("corpus", "users_deferring_daily_frac"), Some(0.0));
        assert_eq!(t.value("corpus", "message_deferral_rate"), Some(0.0));
        assert_eq!(
            t.value("corpus", "triage_sessions_with_deferral_frac"),
            Some(0.0)
        );
    }

    #[test]
    fn saturday_only_deferral_excluded_from_daily_stat() {
        // 2018-05-12 is a Saturday; 2018-05-14 a Monday.
        let saturday = 1526112000 + 10 * 3600;
        let monday = saturday + 2 * 86400;
        let mut messages = BTreeMap::new();
        for (id, deliv) in [("m1", saturday - 50), ("m2", monday - 50)] {
            let mut m = meta(id, "u1", 2, false);
            m.delivery_time = deliv;
            messages.insert(id.to_string(), m);
        }
        let mk = |msg: &str, action, ts| ActionRecord {
            user_id: "u1".to_string(),
            message_id: msg.to_string(),
            action,
            timestamp: ts,
        };
        let actions = vec![
            mk("m1", ActionType::Read, saturday),
            mk("m1", ActionType::Reply, saturday + 5000),
            mk("m2", ActionType::Read, monday),
        ];
        let corpus = Corpus::new(actions, messages, Default::default()).unwrap();
        let (labels, sessions) = labeled(&corpus);
        assert_eq!(labels.count(DeferralClass::Deferred), 1);
        let t = headline_stats(&labels, &sessions, &corpus, TriageRule::default(), &quick_ci());
        assert_eq!(t.value("corpus", "users_deferring_daily_frac"), Some(0.0));
    }

    #[test]
    fn weekend_only_corpus_reports_undefined_daily_stat() {
        let saturday = 1526112000 + 10 * 3600;
        let mut messages = BTreeMap::new();
        let mut m = meta("m1", "u1", 2, false);
        m.delivery_time = saturday - 50;
        messages.insert("m1".to_string(), m);
        let actions = vec![ActionRecord {
            user_id: "u1".to_string(),
            message_id: "m1".to_string(),
            action: ActionType::Read,
            timestamp: saturday,
        }];
        let corpus = Corpus::new(actions, messages, Default::default()).unwrap();
        let (labels, sessions) = labeled(&corpus);
        let t = headline_stats(&labels, &sessions, &corpus, TriageRule::default(), &quick_ci());
        assert!(t.value("corpus", "users_deferring_daily_frac").is_none());
        assert!(t.notes.iter().any(|n| n.contains("zero weekdays")));
    }

    #[test]
    fn workload_curve_buckets_and_baseline() {
        let corpus = hand_corpus();
        let (labels, sessions) = labeled(&corpus);
        let t = workload_curve(
            &labels,
            &sessions,
            &corpus,
            WorkloadMetric::UnhandledMessages,
            &DEFAULT_WORKLOAD_BUCKETS,
            &quick_ci(),
        );
        let baseline = t.value(GROUP_BASELINE, "deferral_rate").unwrap();
        assert!((baseline - 0.25).abs() < 1e-12);
        // Bucket rates are probabilities.
        for r in &t.rows {
            assert!((0.0..=1.0).contains(&r.value));
        }
        // Some bucket edges see no messages and are noted.
        assert!(!t.notes.is_empty());
    }
}
