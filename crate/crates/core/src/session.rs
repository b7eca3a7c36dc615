//! Inactivity-gap sessionization.
//!
//! A session is a maximal run of one user's actions in which no two
//! consecutive actions are more than `gap_threshold_secs` apart. A gap of
//! exactly the threshold stays within the session; strictly exceeding it
//! starts a new one.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::corpus::{ActionRecord, ActionType, Corpus};
use crate::error::{Error, Result};

pub const DEFAULT_GAP_THRESHOLD_SECS: i64 = 600;

/// One session: a contiguous index range into `Corpus::actions`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub user_id: String,
    /// Per-user ordinal, from 0 in time order.
    pub ordinal: usize,
    pub start_ts: i64,
    pub end_ts: i64,
    pub action_range: Range<usize>,
}

impl Session {
    pub fn actions<'c>(&self, corpus: &'c Corpus) -> &'c [ActionRecord] {
        &corpus.actions[self.action_range.clone()]
    }

    pub fn n_actions(&self) -> usize {
        self.action_range.len()
    }
}

/// Sessions for every user with at least one action.
#[derive(Debug, Clone, Default)]
pub struct Sessions {
    by_user: BTreeMap<String, Vec<Session>>,
}

impl Sessions {
    /// A user with no actions yields an empty slice.
    pub fn for_user(&self, user_id: &str) -> &[Session] {
        self.by_user.get(user_id).map_or(&[], Vec::as_slice)
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Session> {
        self.by_user.values().flatten()
    }

    pub fn total(&self) -> usize {
        self.by_user.values().map(Vec::len).sum()
    }

    /// Ordinal of the session containing timestamp `ts` for `user_id`.
    /// Returns `None` for timestamps between sessions.
    pub fn ordinal_at(&self, user_id: &str, ts: i64) -> Option<usize> {
        let sessions = self.for_user(user_id);
        let idx = sessions.partition_point(|s| s.start_ts <= ts);
        if idx == 0 {
            return None;
        }
        let s = &sessions[idx - 1];
        (ts <= s.end_ts).then_some(s.ordinal)
    }

    pub fn get(&self, user_id: &str, ordinal: usize) -> Option<&Session> {
        self.for_user(user_id).get(ordinal)
    }
}

/// Partitions each user's action stream into sessions.
///
/// A new session starts when the gap to the previous action strictly exceeds
/// `gap_threshold_secs`.
pub fn sessionize(corpus: &Corpus, gap_threshold_secs: i64) -> Result<Sessions> {
    if gap_threshold_secs <= 0 {
        return Err(Error::Config(format!(
            "gap threshold must be positive, got {gap_threshold_secs}"
        )));
    }
    let mut by_user: BTreeMap<String, Vec<Session>> = BTreeMap::new();
    let actions = &corpus.actions;
    let mut start = 0;
    for j in 1..=actions.len() {
        let boundary = j == actions.len()
            || actions[j].user_id != actions[start].user_id
            || actions[j].timestamp - actions[j - 1].timestamp > gap_threshold_secs;
        if !boundary {
            continue;
        }
        let user = &actions[start].user_id;
        let sessions = by_user.entry(user.clone()).or_default();
        sessions.push(Session {
            user_id: user.clone(),
            ordinal: sessions.len(),
            start_ts: actions[start].timestamp,
            end_ts: actions[j - 1].timestamp,
            action_range: start..j,
        });
        start = j;
    }
    Ok(Sessions { by_user })
}

/// Wire format for one `sessions.jsonl` line.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct SessionBounds {
    pub user: String,
    pub idx: usize,
    pub start: i64,
    pub end: i64,
    pub n_actions: usize,
}

pub fn write_sessions(sessions: &Sessions, mut w: impl std::io::Write) -> Result<()> {
    for s in sessions.iter() {
        let line = SessionBounds {
            user: s.user_id.clone(),
            idx: s.ordinal,
            start: s.start_ts,
            end: s.end_ts,
            n_actions: s.n_actions(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_session_bounds(reader: impl std::io::BufRead) -> Result<Vec<SessionBounds>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                file: "sessions.jsonl".to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

impl Sessions {
    /// Rebuilds sessions from serialized bounds against the corpus they were
    /// computed from. Errors when the bounds do not partition the corpus
    /// actions (wrong corpus, wrong gap threshold, or corrupted file).
    pub fn from_bounds(corpus: &Corpus, bounds: &[SessionBounds]) -> Result<Sessions> {
        let mut by_user: BTreeMap<String, Vec<Session>> = BTreeMap::new();
        for b in bounds {
            let user_lo = corpus
                .actions
                .partition_point(|a| a.user_id.as_str() < b.user.as_str());
            let user_actions = corpus.actions_for(&b.user);
            let lo = user_actions.partition_point(|a| a.timestamp < b.start);
            let hi = user_actions.partition_point(|a| a.timestamp <= b.end);
            if hi - lo != b.n_actions {
                return Err(Error::Validation(format!(
                    "session ({}, {}) covers {} corpus actions, file says {}",
                    b.user,
                    b.idx,
                    hi - lo,
                    b.n_actions
                )));
            }
            let sessions = by_user.entry(b.user.clone()).or_default();
            if sessions.len() != b.idx {
                return Err(Error::Validation(format!(
                    "session ordinals for {} are not contiguous at {}",
                    b.user, b.idx
                )));
            }
            sessions.push(Session {
                user_id: b.user.clone(),
                ordinal: b.idx,
                start_ts: b.start,
                end_ts: b.end,
                action_range: user_lo + lo..user_lo + hi,
            });
        }
        let rebuilt = Sessions { by_user };
        let covered: usize = rebuilt.iter().map(Session::n_actions).sum();
        if covered != corpus.actions.len() {
            return Err(Error::Validation(format!(
                "sessions cover {covered} of {} corpus actions",
                corpus.actions.len()
            )));
        }
        Ok(rebuilt)
    }
}

/// True iff the session contains the first Read of at least one message —
/// the adopted definition of a triage session.
pub fn is_triage_session(session: &Session, corpus: &Corpus) -> bool {
    let user_actions = corpus.actions_for(&session.user_id);
    for a in session.actions(corpus) {
        if a.action != ActionType::Read {
            continue;
        }
        let earlier_read = user_actions.iter().any(|b| {
            b.message_id == a.message_id && b.action == ActionType::Read && b.timestamp < a.timestamp
        });
        if !earlier_read {
            return true;
        }
    }
    false
}
