//! Canonical data model for email action logs.
//!
//! A [`Corpus`] bundles three record streams: timestamped user actions
//! against messages, per-message metadata, and hourly calendar slots. All
//! three are serialized as line-delimited JSON (UTF-8, LF-terminated).
//! Construction validates referential integrity and the per-type invariants,
//! so every downstream stage can assume a well-formed corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One verb from the action-log taxonomy.
///
/// `Reply`, `ReplyAll`, and `Forward` form the closed set of *strong*
/// actions: the signals treated as completing the task behind a message.
/// Unknown verbs are rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionType {
    Read,
    Reply,
    ReplyAll,
    Forward,
    Flag,
    FlagComplete,
    MarkAsUnread,
    Delete,
    Move,
    LinkClicked,
    OpenedAnAttachment,
    SearchRetrieved,
}

impl ActionType {
    pub const ALL: [ActionType; 12] = [
        ActionType::Read,
        ActionType::Reply,
        ActionType::ReplyAll,
        ActionType::Forward,
        ActionType::Flag,
        ActionType::FlagComplete,
        ActionType::MarkAsUnread,
        ActionType::Delete,
        ActionType::Move,
        ActionType::LinkClicked,
        ActionType::OpenedAnAttachment,
        ActionType::SearchRetrieved,
    ];

    /// The non-strong, non-read verbs whose per-message observation rates the
    /// descriptive statistics report.
    pub const STRATEGY: [ActionType; 7] = [
        ActionType::Delete,
        ActionType::Flag,
        ActionType::FlagComplete,
        ActionType::LinkClicked,
        ActionType::MarkAsUnread,
        ActionType::Move,
        ActionType::OpenedAnAttachment,
    ];

    pub fn is_strong(self) -> bool {
        matches!(
            self,
            ActionType::Reply | ActionType::ReplyAll | ActionType::Forward
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionType::Read => "Read",
            ActionType::Reply => "Reply",
            ActionType::ReplyAll => "ReplyAll",
            ActionType::Forward => "Forward",
            ActionType::Flag => "Flag",
            ActionType::FlagComplete => "FlagComplete",
            ActionType::MarkAsUnread => "MarkAsUnread",
            ActionType::Delete => "Delete",
            ActionType::Move => "Move",
            ActionType::LinkClicked => "LinkClicked",
            ActionType::OpenedAnAttachment => "OpenedAnAttachment",
            ActionType::SearchRetrieved => "SearchRetrieved",
        }
    }
}

impl FromStr for ActionType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ActionType::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown action verb {s:?}"))
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timestamped user action against one message. Timestamps are integer
/// seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionRecord {
    pub user_id: String,
    pub message_id: String,
    pub action: ActionType,
    pub timestamp: i64,
}

/// Wire format for one `actions.jsonl` line.
#[derive(Serialize, Deserialize)]
struct ActionLine {
    user: String,
    msg: String,
    action: ActionType,
    ts: i64,
}

impl From<ActionLine> for ActionRecord {
    fn from(l: ActionLine) -> Self {
        ActionRecord {
            user_id: l.user,
            message_id: l.msg,
            action: l.action,
            timestamp: l.ts,
        }
    }
}

impl ActionRecord {
    fn to_line(&self) -> ActionLine {
        ActionLine {
            user: self.user_id.clone(),
            msg: self.message_id.clone(),
            action: self.action,
            ts: self.timestamp,
        }
    }
}

/// Per-message metadata. `user_id` is the recipient mailbox owner; boolean
/// request flags come from upstream text classifiers and are treated as
/// given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageMeta {
    pub message_id: String,
    pub user_id: String,
    pub delivery_time: i64,
    /// Body length in words.
    pub unique_body_length: u32,
    pub num_recipients: u32,
    pub is_bulk: bool,
    pub is_in_thread: bool,
    pub is_human_sender: bool,
    pub is_same_org: bool,
    pub is_known_sender: bool,
    pub is_important_sender: bool,
    pub is_action_request: bool,
    pub is_reply_request: bool,
}

/// One hour of one user's calendar. The four fractions partition the hour
/// and must sum to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarSlot {
    pub user_id: String,
    /// Hour-aligned seconds since epoch.
    pub slot_start: i64,
    pub num_meetings: u32,
    pub num_meetings_organized: u32,
    pub frac_busy: f64,
    pub frac_free: f64,
    pub frac_tentative: f64,
    pub frac_ooo: f64,
}

impl CalendarSlot {
    fn validate(&self) -> Result<()> {
        if self.slot_start % 3600 != 0 {
            return Err(Error::Validation(format!(
                "calendar slot_start {} for user {:?} is not hour-aligned",
                self.slot_start, self.user_id
            )));
        }
        if self.num_meetings_organized > self.num_meetings {
            return Err(Error::Validation(format!(
                "calendar slot ({:?}, {}): organized {} exceeds meetings {}",
                self.user_id, self.slot_start, self.num_meetings_organized, self.num_meetings
            )));
        }
        let fracs = [
            self.frac_busy,
            self.frac_free,
            self.frac_tentative,
            self.frac_ooo,
        ];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Validation(format!(
                "calendar slot ({:?}, {}): fraction outside [0,1]",
                self.user_id, self.slot_start
            )));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "calendar slot ({:?}, {}): fractions sum to {sum}, expected 1",
                self.user_id, self.slot_start
            )));
        }
        Ok(())
    }
}

/// A validated, sorted log corpus.
///
/// `actions` is sorted by `(user_id, timestamp, message_id, action)`; the
/// last two keys make tie order deterministic. Every action's message
/// resolves to metadata owned by the acting user, and no action precedes its
/// message's delivery.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub actions: Vec<ActionRecord>,
    pub messages: BTreeMap<String, MessageMeta>,
    pub calendar: BTreeMap<(String, i64), CalendarSlot>,
}

/// Outcome of [`filter_active_users`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActiveUserReport {
    pub retained: usize,
    pub dropped_below_ratio: usize,
    /// Users with zero delivered messages; their ratio is undefined and they
    /// are dropped.
    pub dropped_zero_delivered: usize,
}

impl Corpus {
    /// Builds a corpus from parts, sorting actions and validating every
    /// invariant.
    pub fn new(
        mut actions: Vec<ActionRecord>,
        messages: BTreeMap<String, MessageMeta>,
        calendar: BTreeMap<(String, i64), CalendarSlot>,
    ) -> Result<Corpus> {
        actions.sort_by(|a, b| {
            (&a.user_id, a.timestamp, &a.message_id, a.action).cmp(&(
                &b.user_id,
                b.timestamp,
                &b.message_id,
                b.action,
            ))
        });
        for w in actions.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Validation(format!(
                    "duplicate action ({:?}, {:?}, {}, {})",
                    w[0].user_id, w[0].message_id, w[0].action, w[0].timestamp
                )));
            }
        }
        for (id, meta) in &messages {
            if id != &meta.message_id {
                return Err(Error::Validation(format!(
                    "message map key {id:?} does not match record id {:?}",
                    meta.message_id
                )));
            }
            if meta.num_recipients < 1 {
                return Err(Error::Validation(format!(
                    "message {id:?}: num_recipients must be >= 1"
                )));
            }
        }
        for slot in calendar.values() {
            slot.validate()?;
        }
        for a in &actions {
            let meta = messages.get(&a.message_id).ok_or_else(|| {
                Error::ReferentialIntegrity(format!(
                    "action by {:?} references unknown message {:?}",
                    a.user_id, a.message_id
                ))
            })?;
            if meta.user_id != a.user_id {
                return Err(Error::Validation(format!(
                    "action by {:?} on message {:?} owned by {:?}",
                    a.user_id, a.message_id, meta.user_id
                )));
            }
            if a.timestamp < meta.delivery_time {
                return Err(Error::Validation(format!(
                    "action on {:?} at {} precedes delivery at {}",
                    a.message_id, a.timestamp, meta.delivery_time
                )));
            }
        }
        Ok(Corpus {
            actions,
            messages,
            calendar,
        })
    }

    /// All user ids appearing anywhere in the corpus.
    pub fn user_ids(&self) -> BTreeSet<&str> {
        let mut ids: BTreeSet<&str> = self.actions.iter().map(|a| a.user_id.as_str()).collect();
        ids.extend(self.messages.values().map(|m| m.user_id.as_str()));
        ids.extend(self.calendar.keys().map(|(u, _)| u.as_str()));
        ids
    }

    /// The contiguous, time-sorted slice of one user's actions.
    pub fn actions_for(&self, user_id: &str) -> &[ActionRecord] {
        let lo = self
            .actions
            .partition_point(|a| a.user_id.as_str() < user_id);
        let hi = self
            .actions
            .partition_point(|a| a.user_id.as_str() <= user_id);
        &self.actions[lo..hi]
    }

    /// Per-user message deliveries sorted by `(delivery_time, message_id)`.
    pub fn delivery_index(&self) -> BTreeMap<&str, Vec<&MessageMeta>> {
        let mut index: BTreeMap<&str, Vec<&MessageMeta>> = BTreeMap::new();
        for meta in self.messages.values() {
            index.entry(meta.user_id.as_str()).or_default().push(meta);
        }
        for deliveries in index.values_mut() {
            deliveries.sort_by(|a, b| {
                (a.delivery_time, &a.message_id).cmp(&(b.delivery_time, &b.message_id))
            });
        }
        index
    }

    /// The calendar slot covering `ts` for `user_id`, if any.
    pub fn calendar_slot_at(&self, user_id: &str, ts: i64) -> Option<&CalendarSlot> {
        let slot_start = ts.div_euclid(3600) * 3600;
        self.calendar.get(&(user_id.to_string(), slot_start))
    }
}

fn parse_jsonl<T, F>(reader: impl BufRead, file: &str, mut each: F) -> Result<()>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(T) -> Result<()>,
{
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: file.to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        each(record)?;
    }
    Ok(())
}

/// Parses the three JSONL streams into a validated [`Corpus`].
///
/// Malformed lines surface as parse errors with the offending line number;
/// cross-reference and invariant violations surface as referential-integrity
/// or validation errors.
pub fn parse_corpus(
    actions: impl BufRead,
    messages: impl BufRead,
    calendar: impl BufRead,
) -> Result<Corpus> {
    let mut action_records = Vec::new();
    parse_jsonl::<ActionLine, _>(actions, "actions.jsonl", |l| {
        action_records.push(ActionRecord::from(l));
        Ok(())
    })?;

    let mut message_map = BTreeMap::new();
    parse_jsonl::<MessageMeta, _>(messages, "messages.jsonl", |m| {
        if let Some(prev) = message_map.insert(m.message_id.clone(), m) {
            return Err(Error::Validation(format!(
                "duplicate message metadata for {:?}",
                prev.message_id
            )));
        }
        Ok(())
    })?;

    let mut calendar_map = BTreeMap::new();
    parse_jsonl::<CalendarSlot, _>(calendar, "calendar.jsonl", |s| {
        let key = (s.user_id.clone(), s.slot_start);
        if calendar_map.insert(key, s).is_some() {
            return Err(Error::Validation(
                "duplicate calendar slot".to_string(),
            ));
        }
        Ok(())
    })?;

    Corpus::new(action_records, message_map, calendar_map)
}

pub const ACTIONS_FILE: &str = "actions.jsonl";
pub const MESSAGES_FILE: &str = "messages.jsonl";
pub const CALENDAR_FILE: &str = "calendar.jsonl";

/// Loads `actions.jsonl`, `messages.jsonl`, and `calendar.jsonl` from a
/// directory.
pub fn load_dir(dir: &Path) -> Result<Corpus> {
    let open = |name: &str| -> Result<BufReader<std::fs::File>> {
        let path = dir.join(name);
        std::fs::File::open(&path)
            .map(BufReader::new)
            .map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", path.display()),
                ))
            })
    };
    parse_corpus(open(ACTIONS_FILE)?, open(MESSAGES_FILE)?, open(CALENDAR_FILE)?)
}

pub fn write_actions(corpus: &Corpus, mut w: impl Write) -> Result<()> {
    for a in &corpus.actions {
        serde_json::to_writer(&mut w, &a.to_line())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_messages(corpus: &Corpus, mut w: impl Write) -> Result<()> {
    for m in corpus.messages.values() {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_calendar(corpus: &Corpus, mut w: impl Write) -> Result<()> {
    for s in corpus.calendar.values() {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes the three corpus files into `dir` (created if absent).
pub fn write_dir(corpus: &Corpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        Ok(std::io::BufWriter::new(std::fs::File::create(
            dir.join(name),
        )?))
    };
    write_actions(corpus, file(ACTIONS_FILE)?)?;
    write_messages(corpus, file(MESSAGES_FILE)?)?;
    write_calendar(corpus, file(CALENDAR_FILE)?)?;
    Ok(())
}

/// Drops every user whose interaction ratio falls below `min_interaction_ratio`.
///
/// A user is retained iff the number of delivered messages they acted on at
/// least once, divided by the number of messages delivered to them, is at or
/// above the threshold. Users with zero delivered messages have an undefined
/// ratio and are dropped (counted separately in the report). All records of
/// removed users are dropped. The operation is idempotent.
pub fn filter_active_users(
    corpus: &Corpus,
    min_interaction_ratio: f64,
) -> Result<(Corpus, ActiveUserReport)> {
    if !(min_interaction_ratio > 0.0 && min_interaction_ratio <= 1.0) {
        return Err(Error::Config(format!(
            "min_interaction_ratio must be in (0, 1], got {min_interaction_ratio}"
        )));
    }

    let mut delivered: BTreeMap<&str, usize> = BTreeMap::new();
    for meta in corpus.messages.values() {
        *delivered.entry(meta.user_id.as_str()).or_default() += 1;
    }
    let mut acted: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for a in &corpus.actions {
        acted
            .entry(a.user_id.as_str())
            .or_default()
            .insert(a.message_id.as_str());
    }

    let mut report = ActiveUserReport::default();
    let mut keep: BTreeSet<&str> = BTreeSet::new();
    for user in corpus.user_ids() {
        let n_delivered = delivered.get(user).copied().unwrap_or(0);
        if n_delivered == 0 {
            report.dropped_zero_delivered += 1;
            continue;
        }
        let n_acted = acted.get(user).map_or(0, |s| s.len());
        if n_acted as f64 / n_delivered as f64 >= min_interaction_ratio {
            keep.insert(user);
            report.retained += 1;
        } else {
            report.dropped_below_ratio += 1;
        }
    }

    let actions = corpus
        .actions
        .iter()
        .filter(|a| keep.contains(a.user_id.as_str()))
        .cloned()
        .collect();
    let messages = corpus
        .messages
        .iter()
        .filter(|(_, m)| keep.contains(m.user_id.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let calendar = corpus
        .calendar
        .iter()
        .filter(|((u, _), _)| keep.contains(u.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    Ok((Corpus::new(actions, messages, calendar)?, report))
}
