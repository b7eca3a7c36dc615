//! Per-message deferral labels.
//!
//! A message is *deferred* when its first strong action (Reply, ReplyAll,
//! Forward) falls in a session strictly after the session containing its
//! first Read. Messages never read are labeled `NeverRead` and excluded from
//! downstream statistics. The explicit-signal flag records whether a Flag or
//! MarkAsUnread was observed inside the configured signal window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{ActionType, Corpus};
use crate::error::{Error, Result};
use crate::session::Sessions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeferralClass {
    Deferred,
    NonDeferred,
    NeverRead,
}

impl DeferralClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DeferralClass::Deferred => "Deferred",
            DeferralClass::NonDeferred => "NonDeferred",
            DeferralClass::NeverRead => "NeverRead",
        }
    }
}

/// Observation window for the explicit deferral signal (Flag or
/// MarkAsUnread).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignalWindow {
    /// Signal actions inside the first-read session only.
    #[default]
    ReadSession,
    /// Signal actions any time strictly before the first strong action
    /// (any time at all when the message has no strong action).
    PreStrong,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeferralLabel {
    pub message_id: String,
    pub label: DeferralClass,
    /// Ordinal of the session containing the first Read.
    pub first_read_session: Option<usize>,
    /// Ordinal of the session containing the earliest strong action.
    pub first_strong_action_session: Option<usize>,
    pub explicit_signal: bool,
}

/// Labels for every message in a corpus, plus anomaly counters.
#[derive(Debug, Clone, Default)]
pub struct LabelSet {
    labels: BTreeMap<String, DeferralLabel>,
    /// Messages whose earliest strong action precedes any Read (e.g. a reply
    /// issued from a device outside the logs). They are never labeled
    /// Deferred.
    pub strong_without_prior_read: usize,
}

impl LabelSet {
    pub fn get(&self, message_id: &str) -> Option<&DeferralLabel> {
        self.labels.get(message_id)
    }

    /// Iterates labels in message-id order.
    pub fn iter(&self) -> impl Iterator<Item = &DeferralLabel> {
        self.labels.values()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, class: DeferralClass) -> usize {
        self.labels.values().filter(|l| l.label == class).count()
    }
}

#[derive(Default, Clone, Copy)]
struct MessageTrace {
    first_read_ts: Option<i64>,
    first_strong_ts: Option<i64>,
}

fn min_opt(slot: &mut Option<i64>, ts: i64) {
    match slot {
        Some(prev) if *prev <= ts => {}
        _ => *slot = Some(ts),
    }
}

fn label_from_trace(
    message_id: &str,
    user_id: &str,
    trace: MessageTrace,
    sessions: &Sessions,
    corpus: &Corpus,
    window: SignalWindow,
    anomalies: &mut usize,
) -> DeferralLabel {
    let read_ordinal = trace
        .first_read_ts
        .and_then(|ts| sessions.ordinal_at(user_id, ts));
    let strong_ordinal = trace
        .first_strong_ts
        .and_then(|ts| sessions.ordinal_at(user_id, ts));

    let label = match (read_ordinal, strong_ordinal) {
        (None, _) => {
            if trace.first_strong_ts.is_some() {
                *anomalies += 1;
            }
            DeferralClass::NeverRead
        }
        (Some(r), Some(s)) if s > r => DeferralClass::Deferred,
        (Some(_), Some(_)) => {
            if trace.first_strong_ts < trace.first_read_ts {
                *anomalies += 1;
            }
            DeferralClass::NonDeferred
        }
        (Some(_), None) => DeferralClass::NonDeferred,
    };

    let explicit_signal = match (window, read_ordinal) {
        (_, None) => false,
        (SignalWindow::ReadSession, Some(r)) => sessions
            .get(user_id, r)
            .map(|session| {
                session.actions(corpus).iter().any(|a| {
                    a.message_id == message_id
                        && matches!(a.action, ActionType::Flag | ActionType::MarkAsUnread)
                })
            })
            .unwrap_or(false),
        (SignalWindow::PreStrong, Some(_)) => {
            corpus.actions_for(user_id).iter().any(|a| {
                a.message_id == message_id
                    && matches!(a.action, ActionType::Flag | ActionType::MarkAsUnread)
                    && trace.first_strong_ts.is_none_or(|s| a.timestamp < s)
            })
        }
    };

    DeferralLabel {
        message_id: message_id.to_string(),
        label,
        first_read_session: read_ordinal,
        first_strong_action_session: strong_ordinal,
        explicit_signal,
    }
}

/// Labels a single message.
pub fn label_message(
    message_id: &str,
    sessions: &Sessions,
    corpus: &Corpus,
    window: SignalWindow,
) -> Result<DeferralLabel> {
    let meta = corpus
        .messages
        .get(message_id)
        .ok_or_else(|| Error::UnknownMessage(message_id.to_string()))?;
    let mut trace = MessageTrace::default();
    for a in corpus.actions_for(&meta.user_id) {
        if a.message_id != message_id {
            continue;
        }
        match a.action {
            ActionType::Read => min_opt(&mut trace.first_read_ts, a.timestamp),
            t if t.is_strong() => min_opt(&mut trace.first_strong_ts, a.timestamp),
            _ => {}
        }
    }
    let mut anomalies = 0;
    Ok(label_from_trace(
        message_id,
        &meta.user_id,
        trace,
        sessions,
        corpus,
        window,
        &mut anomalies,
    ))
}

/// Labels every message in the corpus. Deterministic: labels are keyed and
/// iterated in message-id order.
pub fn label_corpus(corpus: &Corpus, sessions: &Sessions, window: SignalWindow) -> Result<LabelSet> {
    let mut traces: BTreeMap<&str, MessageTrace> = BTreeMap::new();
    for a in &corpus.actions {
        let trace = traces.entry(a.message_id.as_str()).or_default();
        match a.action {
            ActionType::Read => min_opt(&mut trace.first_read_ts, a.timestamp),
            t if t.is_strong() => min_opt(&mut trace.first_strong_ts, a.timestamp),
            _ => {}
        }
    }

    let mut set = LabelSet::default();
    for (message_id, meta) in &corpus.messages {
        let trace = traces.get(message_id.as_str()).copied().unwrap_or_default();
        let label = label_from_trace(
            message_id,
            &meta.user_id,
            trace,
            sessions,
            corpus,
            window,
            &mut set.strong_without_prior_read,
        );
        set.labels.insert(message_id.clone(), label);
    }
    Ok(set)
}

/// Wire format for one `labels.jsonl` line.
#[derive(Serialize, Deserialize)]
pub struct LabelLine {
    pub msg: String,
    pub label: DeferralClass,
    pub read_sess: Option<usize>,
    pub strong_sess: Option<usize>,
    pub explicit: bool,
}

pub fn write_labels(labels: &LabelSet, mut w: impl std::io::Write) -> Result<()> {
    for l in labels.iter() {
        let line = LabelLine {
            msg: l.message_id.clone(),
            label: l.label,
            read_sess: l.first_read_session,
            strong_sess: l.first_strong_action_session,
            explicit: l.explicit_signal,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_labels(reader: impl std::io::BufRead) -> Result<LabelSet> {
    let mut set = LabelSet::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LabelLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: "labels.jsonl".to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        set.labels.insert(
            parsed.msg.clone(),
            DeferralLabel {
                message_id: parsed.msg,
                label: parsed.label,
                first_read_session: parsed.read_sess,
                first_strong_action_session: parsed.strong_sess,
                explicit_signal: parsed.explicit,
            },
        );
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ActionRecord, MessageMeta};
    use crate::session::sessionize;

    fn meta(msg: &str, user: &str) -> MessageMeta {
        MessageMeta {
            message_id: msg.to_string(),
            user_id: user.to_string(),
            delivery_time: 0,
            unique_body_length: 10,
            num_recipients: 1,
            is_bulk: false,
            is_in_thread: false,
            is_human_sender: true,
            is_same_org: false,
            is_known_sender: true,
            is_important_sender: false,
            is_action_request: false,
            is_reply_request: false,
        }
    }

    fn corpus_of(messages: &[&str], actions: &[(&str, ActionType, i64)]) -> Corpus {
        let user = "u1";
        let metas = messages
            .iter()
            .map(|m| (m.to_string(), meta(m, user)))
            .collect();
        let records = actions
            .iter()
            .map(|(msg, verb, ts)| ActionRecord {
                user_id: user.to_string(),
                message_id: msg.to_string(),
                action: *verb,
                timestamp: *ts,
            })
            .collect();
        Corpus::new(records, metas, Default::default()).unwrap()
    }

    fn labels_for(corpus: &Corpus) -> LabelSet {
        let sessions = sessionize(corpus, 600).unwrap();
        label_corpus(corpus, &sessions, SignalWindow::ReadSession).unwrap()
    }

    #[test]
    fn strong_action_in_later_session_is_deferred() {
        // Sessions at 0, 2000, 4000, 6000, 8000, 10000; read in #2, reply in #5.
        let corpus = corpus_of(
            &["m1", "pad"],
            &[
                ("pad", ActionType::Read, 0),
                ("pad", ActionType::Read, 2000),
                ("m1", ActionType::Read, 4000),
                ("pad", ActionType::Read, 6000),
                ("pad", ActionType::Read, 8000),
                ("m1", ActionType::Reply, 10000),
            ],
        );
        let labels = labels_for(&corpus);
        let l = labels.get("m1").unwrap();
        assert_eq!(l.label, DeferralClass::Deferred);
        assert_eq!(l.first_read_session, Some(2));
        assert_eq!(l.first_strong_action_session, Some(5));
    }

    #[test]
    fn same_session_strong_action_is_not_deferred() {
        let corpus = corpus_of(
            &["m1"],
            &[("m1", ActionType::Read, 100), ("m1", ActionType::ReplyAll, 200)],
        );
        let l = labels_for(&corpus);
        assert_eq!(l.get("m1").unwrap().label, DeferralClass::NonDeferred);
    }

    #[test]
    fn message_without_actions_is_never_read() {
        let corpus = corpus_of(&["m1", "m2"], &[("m2", ActionType::Read, 100)]);
        let l = labels_for(&corpus);
        assert_eq!(l.get("m1").unwrap().label, DeferralClass::NeverRead);
        assert_eq!(l.get("m1").unwrap().first_read_session, None);
    }

    #[test]
    fn strong_before_any_read_counts_as_anomaly() {
        let corpus = corpus_of(
            &["m1"],
            &[("m1", ActionType::Reply, 100), ("m1", ActionType::Read, 5000)],
        );
        let l = labels_for(&corpus);
        assert_eq!(l.get("m1").unwrap().label, DeferralClass::NonDeferred);
        assert_eq!(l.strong_without_prior_read, 1);
    }

    #[test]
    fn explicit_signal_only_in_first_read_session() {
        let corpus = corpus_of(
            &["m1", "m2"],
            &[
                ("m1", ActionType::Read, 100),
                ("m1", ActionType::Flag, 200),
                ("m2", ActionType::Read, 5000),
                ("m2", ActionType::MarkAsUnread, 9000),
            ],
        );
        let l = labels_for(&corpus);
        assert!(l.get("m1").unwrap().explicit_signal);
        // m2's MarkAsUnread is in a later session, outside the read window.
        assert!(!l.get("m2").unwrap().explicit_signal);
    }

    #[test]
    fn pre_strong_window_counts_later_signals() {
        let corpus = corpus_of(
            &["m1"],
            &[
                ("m1", ActionType::Read, 100),
                ("m1", ActionType::Flag, 5000),
                ("m1", ActionType::Reply, 10000),
            ],
        );
        let sessions = sessionize(&corpus, 600).unwrap();
        let read_window = label_corpus(&corpus, &sessions, SignalWindow::ReadSession).unwrap();
        let pre_strong = label_corpus(&corpus, &sessions, SignalWindow::PreStrong).unwrap();
        assert!(!read_window.get("m1").unwrap().explicit_signal);
        assert!(pre_strong.get("m1").unwrap().explicit_signal);
    }

    #[test]
    fn immediate_replies_yield_zero_deferred() {
        let mut actions = Vec::new();
        let mut names = Vec::new();
        for i in 0..20 {
            let name = format!("m{i:02}");
            names.push(name);
        }
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        for (i, name) in name_refs.iter().enumerate() {
            let base = i as i64 * 10_000;
            actions.push((*name, ActionType::Read, base));
            actions.push((*name, ActionType::Reply, base + 30));
        }
        let corpus = corpus_of(&name_refs, &actions);
        let l = labels_for(&corpus);
        assert_eq!(l.count(DeferralClass::Deferred), 0);
        assert_eq!(l.count(DeferralClass::NonDeferred), 20);
    }

    #[test]
    fn label_message_matches_label_corpus() {
        let corpus = corpus_of(
            &["m1", "m2"],
            &[
                ("m1", ActionType::Read, 100),
                ("m2", ActionType::Read, 150),
                ("m1", ActionType::Forward, 5000),
            ],
        );
        let sessions = sessionize(&corpus, 600).unwrap();
        let set = label_corpus(&corpus, &sessions, SignalWindow::ReadSession).unwrap();
        for id in ["m1", "m2"] {
            let single = label_message(id, &sessions, &corpus, SignalWindow::ReadSession).unwrap();
            assert_eq!(&single, set.get(id).unwrap());
        }
        assert!(matches!(
            label_message("mX", &sessions, &corpus, SignalWindow::ReadSession),
            Err(Error::UnknownMessage(_))
        ));
    }

    #[test]
    fn empty_corpus_yields_empty_labels() {
        let corpus = Corpus::default();
        let sessions = sessionize(&corpus, 600).unwrap();
        let l = label_corpus(&corpus, &sessions, SignalWindow::ReadSession).unwrap();
        assert!(l.is_empty());
    }

    #[test]
    fn labels_roundtrip_through_jsonl() {
        let corpus = corpus_of(
            &["m1", "m2"],
            &[
                ("m1", ActionType::Read, 100),
                ("m1", ActionType::Flag, 110),
                ("m1", ActionType::Reply, 5000),
                ("m2", ActionType::Read, 150),
            ],
        );
        let set = labels_for(&corpus);
        let mut buf = Vec::new();
        write_labels(&set, &mut buf).unwrap();
        let parsed = read_labels(buf.as_slice()).unwrap();
        assert_eq!(parsed.len(), set.len());
        for l in set.iter() {
            assert_eq!(parsed.get(&l.message_id).unwrap(), l);
        }
    }
}
