//! Feature extraction for deferral prediction.
//!
//! Each message that has a first-read session maps to one fixed-order
//! feature vector: action counts inside the first-read session, message
//! metadata, user-profile features, workload counts at the moment of first
//! read, calendar occupancy for the hour of first read, and the UTC time
//! decomposition of the first read. Calendar features are zero-imputed when
//! no slot covers the read, with a companion `CalendarPresent` indicator.
//!
//! Apart from the user-level profile features (mailbox bucket and
//! management style, computed over the whole corpus window), extraction
//! consults only records timestamped at or before the end of the first-read
//! session.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Timelike};

use crate::corpus::{ActionType, Corpus};
use crate::error::{Error, Result};
use crate::label::LabelSet;
use crate::session::Sessions;
use crate::workload::WorkloadIndex;

/// Canonical feature-column names, in matrix order. The management style is
/// one-hot encoded; `CalendarPresent` flags whether a calendar slot covered
/// the first read.
pub const FEATURE_COLUMNS: [&str; 33] = [
    "NumResponse",
    "NumFlag",
    "NumMarkUnread",
    "NumOpenAtt",
    "NumLinkClk",
    "NumMove",
    "NumDelete",
    "NumSearch",
    "UniqueBodyLength",
    "IsBulkMessage",
    "IsInThread",
    "NumRecipients",
    "IsHuman",
    "IsSenderFromSameOrg",
    "IsKnownSender",
    "IsImportantSender",
    "MailboxSizeBucket",
    "StylePiler",
    "StyleZeroInbox",
    "StyleZeroUnread",
    "NumMessages",
    "NumMessagesSLTS",
    "NumMeetings",
    "NumMeetingsOrg",
    "TimeBusy",
    "TimeFree",
    "TimeTentative",
    "TimeOOO",
    "HourOfDay",
    "DayOfWeek",
    "DayOfMonth",
    "Month",
    "CalendarPresent",
];

/// Number of logical source fields before encoding: the management style
/// expands to three columns and `CalendarPresent` is an imputation
/// companion, so 30 source fields become 33 matrix columns.
pub const SOURCE_FIELDS: usize = 30;

/// Column indices by name.
pub mod col {
    pub const NUM_RESPONSE: usize = 0;
    pub const NUM_FLAG: usize = 1;
    pub const NUM_MARK_UNREAD: usize = 2;
    pub const NUM_OPEN_ATT: usize = 3;
    pub const NUM_LINK_CLK: usize = 4;
    pub const NUM_MOVE: usize = 5;
    pub const NUM_DELETE: usize = 6;
    pub const NUM_SEARCH: usize = 7;
    pub const UNIQUE_BODY_LENGTH: usize = 8;
    pub const IS_BULK: usize = 9;
    pub const IS_IN_THREAD: usize = 10;
    pub const NUM_RECIPIENTS: usize = 11;
    pub const IS_HUMAN: usize = 12;
    pub const IS_SAME_ORG: usize = 13;
    pub const IS_KNOWN_SENDER: usize = 14;
    pub const IS_IMPORTANT_SENDER: usize = 15;
    pub const MAILBOX_SIZE_BUCKET: usize = 16;
    pub const STYLE_PILER: usize = 17;
    pub const STYLE_ZERO_INBOX: usize = 18;
    pub const STYLE_ZERO_UNREAD: usize = 19;
    pub const NUM_MESSAGES: usize = 20;
    pub const NUM_MESSAGES_SLTS: usize = 21;
    pub const NUM_MEETINGS: usize = 22;
    pub const NUM_MEETINGS_ORG: usize = 23;
    pub const TIME_BUSY: usize = 24;
    pub const TIME_FREE: usize = 25;
    pub const TIME_TENTATIVE: usize = 26;
    pub const TIME_OOO: usize = 27;
    pub const HOUR_OF_DAY: usize = 28;
    pub const DAY_OF_WEEK: usize = 29;
    pub const DAY_OF_MONTH: usize = 30;
    pub const MONTH: usize = 31;
    pub const CALENDAR_PRESENT: usize = 32;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COLUMNS.len()]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Mailbox-size bucket over total received count in the corpus window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MailboxSizeBucket {
    Under10,
    From10To24,
    From25To99,
    AtLeast100,
}

impl MailboxSizeBucket {
    pub fn from_count(received: usize) -> Self {
        match received {
            0..=9 => MailboxSizeBucket::Under10,
            10..=24 => MailboxSizeBucket::From10To24,
            25..=99 => MailboxSizeBucket::From25To99,
            _ => MailboxSizeBucket::AtLeast100,
        }
    }

    pub fn ordinal(self) -> u8 {
        match self {
            MailboxSizeBucket::Under10 => 0,
            MailboxSizeBucket::From10To24 => 1,
            MailboxSizeBucket::From25To99 => 2,
            MailboxSizeBucket::AtLeast100 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManagementStyle {
    Piler,
    ZeroInbox,
    ZeroUnread,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: String,
    pub mailbox_size_bucket: MailboxSizeBucket,
    pub management_style: ManagementStyle,
}

/// Thresholds for the management-style heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StyleThresholds {
    /// ZeroInbox when at least this fraction of read messages receives a
    /// Move or Delete in the corpus window.
    pub zero_inbox_min_filed_frac: f64,
    /// Otherwise ZeroUnread when at least this fraction of delivered
    /// messages is eventually read.
    pub zero_unread_min_read_frac: f64,
}

impl Default for StyleThresholds {
    fn default() -> Self {
        StyleThresholds {
            zero_inbox_min_filed_frac: 0.75,
            zero_unread_min_read_frac: 0.90,
        }
    }
}

/// Infers the profile for one user from corpus-window aggregates.
pub fn infer_profile(user_id: &str, corpus: &Corpus, thresholds: &StyleThresholds) -> UserProfile {
    let received = corpus
        .messages
        .values()
        .filter(|m| m.user_id == user_id)
        .count();

    let user_actions = corpus.actions_for(user_id);
    let mut read_ids: BTreeMap<&str, bool> = BTreeMap::new();
    for a in user_actions {
        if a.action == ActionType::Read {
            read_ids.entry(a.message_id.as_str()).or_insert(false);
        }
    }
    for a in user_actions {
        if matches!(a.action, ActionType::Move | ActionType::Delete) {
            if let Some(filed) = read_ids.get_mut(a.message_id.as_str()) {
                *filed = true;
            }
        }
    }
    let n_read = read_ids.len();
    let n_filed = read_ids.values().filter(|&&f| f).count();

    let style = if n_read > 0
        && n_filed as f64 / n_read as f64 >= thresholds.zero_inbox_min_filed_frac
    {
        ManagementStyle::ZeroInbox
    } else if received > 0
        && n_read as f64 / received as f64 >= thresholds.zero_unread_min_read_frac
    {
        ManagementStyle::ZeroUnread
    } else {
        ManagementStyle::Piler
    };

    UserProfile {
        user_id: user_id.to_string(),
        mailbox_size_bucket: MailboxSizeBucket::from_count(received),
        management_style: style,
    }
}

/// Profiles for every user in the corpus.
pub fn infer_profiles(
    corpus: &Corpus,
    thresholds: &StyleThresholds,
) -> BTreeMap<String, UserProfile> {
    corpus
        .user_ids()
        .into_iter()
        .map(|u| (u.to_string(), infer_profile(u, corpus, thresholds)))
        .collect()
}

/// Precomputed per-corpus state for feature extraction.
pub struct FeatureExtractor<'c> {
    corpus: &'c Corpus,
    sessions: &'c Sessions,
    labels: &'c LabelSet,
    profiles: &'c BTreeMap<String, UserProfile>,
    workload: WorkloadIndex<'c>,
    first_read_ts: BTreeMap<&'c str, i64>,
}

impl<'c> FeatureExtractor<'c> {
    pub fn new(
        corpus: &'c Corpus,
        sessions: &'c Sessions,
        labels: &'c LabelSet,
        profiles: &'c BTreeMap<String, UserProfile>,
    ) -> Self {
        let mut first_read_ts: BTreeMap<&str, i64> = BTreeMap::new();
        for a in &corpus.actions {
            if a.action == ActionType::Read {
                first_read_ts
                    .entry(a.message_id.as_str())
                    .and_modify(|ts| *ts = (*ts).min(a.timestamp))
                    .or_insert(a.timestamp);
            }
        }
        FeatureExtractor {
            corpus,
            sessions,
            labels,
            profiles,
            workload: WorkloadIndex::new(corpus),
            first_read_ts,
        }
    }

    /// Extracts the feature vector for one message. Errors when the message
    /// is unknown or was never read.
    pub fn extract(&self, message_id: &str) -> Result<FeatureVector> {
        let meta = self
            .corpus
            .messages
            .get(message_id)
            .ok_or_else(|| Error::UnknownMessage(message_id.to_string()))?;
        let label = self
            .labels
            .get(message_id)
            .ok_or_else(|| Error::UnknownMessage(message_id.to_string()))?;
        let read_ordinal = label
            .first_read_session
            .ok_or_else(|| Error::NoFirstRead(message_id.to_string()))?;
        let read_ts = *self
            .first_read_ts
            .get(message_id)
            .ok_or_else(|| Error::NoFirstRead(message_id.to_string()))?;
        let session = self
            .sessions
            .get(&meta.user_id, read_ordinal)
            .ok_or_else(|| Error::NoFirstRead(message_id.to_string()))?;

        let mut v = [0.0f64; FEATURE_COLUMNS.len()];

        // Action counts on this message within the first-read session.
        for a in session.actions(self.corpus) {
            if a.message_id != message_id {
                continue;
            }
            match a.action {
                ActionType::Reply | ActionType::ReplyAll | ActionType::Forward => {
                    v[col::NUM_RESPONSE] += 1.0
                }
                ActionType::Flag | ActionType::FlagComplete => v[col::NUM_FLAG] += 1.0,
                ActionType::MarkAsUnread => v[col::NUM_MARK_UNREAD] += 1.0,
                ActionType::OpenedAnAttachment => v[col::NUM_OPEN_ATT] += 1.0,
                ActionType::LinkClicked => v[col::NUM_LINK_CLK] += 1.0,
                ActionType::Move => v[col::NUM_MOVE] += 1.0,
                ActionType::Delete => v[col::NUM_DELETE] += 1.0,
                ActionType::SearchRetrieved => v[col::NUM_SEARCH] += 1.0,
                ActionType::Read => {}
            }
        }

        v[col::UNIQUE_BODY_LENGTH] = f64::from(meta.unique_body_length);
        v[col::IS_BULK] = f64::from(meta.is_bulk);
        v[col::IS_IN_THREAD] = f64::from(meta.is_in_thread);
        v[col::NUM_RECIPIENTS] = f64::from(meta.num_recipients);
        v[col::IS_HUMAN] = f64::from(meta.is_human_sender);
        v[col::IS_SAME_ORG] = f64::from(meta.is_same_org);
        v[col::IS_KNOWN_SENDER] = f64::from(meta.is_known_sender);
        v[col::IS_IMPORTANT_SENDER] = f64::from(meta.is_important_sender);

        let profile = self
            .profiles
            .get(&meta.user_id)
            .ok_or_else(|| Error::Validation(format!("no profile for user {:?}", meta.user_id)))?;
        v[col::MAILBOX_SIZE_BUCKET] = f64::from(profile.mailbox_size_bucket.ordinal());
        match profile.management_style {
            ManagementStyle::Piler => v[col::STYLE_PILER] = 1.0,
            ManagementStyle::ZeroInbox => v[col::STYLE_ZERO_INBOX] = 1.0,
            ManagementStyle::ZeroUnread => v[col::STYLE_ZERO_UNREAD] = 1.0,
        }

        v[col::NUM_MESSAGES] = f64::from(
            self.workload
                .unhandled_count(message_id, read_ts)
                .expect("message is indexed"),
        );
        // Since the end of the previous session; the full history when the
        // first-read session is the user's first.
        let slts = if read_ordinal == 0 {
            self.workload.unhandled_count(message_id, read_ts)
        } else {
            let prev_end = self
                .sessions
                .get(&meta.user_id, read_ordinal - 1)
                .map(|s| s.end_ts)
                .expect("previous session exists");
            self.workload
                .unhandled_count_since(message_id, prev_end, read_ts)
        };
        v[col::NUM_MESSAGES_SLTS] = f64::from(slts.expect("message is indexed"));

        if let Some(slot) = self.corpus.calendar_slot_at(&meta.user_id, read_ts) {
            v[col::NUM_MEETINGS] = f64::from(slot.num_meetings);
            v[col::NUM_MEETINGS_ORG] = f64::from(slot.num_meetings_organized);
            v[col::TIME_BUSY] = slot.frac_busy;
            v[col::TIME_FREE] = slot.frac_free;
            v[col::TIME_TENTATIVE] = slot.frac_tentative;
            v[col::TIME_OOO] = slot.frac_ooo;
            v[col::CALENDAR_PRESENT] = 1.0;
        }

        let dt = DateTime::from_timestamp(read_ts, 0)
            .ok_or_else(|| Error::Validation(format!("timestamp {read_ts} out of range")))?;
        v[col::HOUR_OF_DAY] = f64::from(dt.hour());
        v[col::DAY_OF_WEEK] = f64::from(dt.weekday().num_days_from_monday());
        v[col::DAY_OF_MONTH] = f64::from(dt.day());
        v[col::MONTH] = f64::from(dt.month());

        Ok(FeatureVector(v))
    }
}

/// A feature matrix with aligned labels, weights, and message ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    values: Vec<f64>,
    num_cols: usize,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
    pub message_ids: Vec<String>,
}

impl Dataset {
    pub fn from_rows(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        weights: Vec<f64>,
        message_ids: Vec<String>,
    ) -> Result<Dataset> {
        let num_cols = feature_names.len();
        if rows.iter().any(|r| r.len() != num_cols) {
            return Err(Error::DimensionMismatch(
                "row length differs from feature names".to_string(),
            ));
        }
        if rows.len() != labels.len()
            || rows.len() != weights.len()
            || rows.len() != message_ids.len()
        {
            return Err(Error::DimensionMismatch(
                "rows, labels, weights, and ids must align".to_string(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Validation(
                "instance weights must be positive".to_string(),
            ));
        }
        let mut values = Vec::with_capacity(rows.len() * num_cols);
        for r in &rows {
            values.extend_from_slice(r);
        }
        Ok(Dataset {
            feature_names,
            values,
            num_cols,
            labels,
            weights,
            message_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.num_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.num_cols..(i + 1) * self.num_cols]
    }

    /// A copy without the named columns.
    pub fn drop_columns(&self, names: &[&str]) -> Dataset {
        let keep: Vec<usize> = (0..self.num_cols)
            .filter(|&i| !names.contains(&self.feature_names[i].as_str()))
            .collect();
        let feature_names = keep
            .iter()
            .map(|&i| self.feature_names[i].clone())
            .collect();
        let mut values = Vec::with_capacity(self.n_rows() * keep.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            values.extend(keep.iter().map(|&i| row[i]));
        }
        Dataset {
            feature_names,
            values,
            num_cols: keep.len(),
            labels: self.labels.clone(),
            weights: self.weights.clone(),
            message_ids: self.message_ids.clone(),
        }
    }

    /// A copy restricted to the given row indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.num_cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            values,
            num_cols: self.num_cols,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
            message_ids: indices
                .iter()
                .map(|&i| self.message_ids[i].clone())
                .collect(),
        }
    }
}

/// Builds a dataset for a cohort: rows in cohort order, label 1 for
/// positives, and `positive_weight` on positive rows (1 otherwise).
pub fn build_dataset(
    extractor: &FeatureExtractor<'_>,
    cohort: &[String],
    positive: &[bool],
    positive_weight: f64,
) -> Result<Dataset> {
    if cohort.is_empty() {
        return Err(Error::EmptyCohort("no messages in cohort".to_string()));
    }
    if cohort.len() != positive.len() {
        return Err(Error::DimensionMismatch(
            "cohort and positives must align".to_string(),
        ));
    }
    if !(positive_weight > 0.0) {
        return Err(Error::Config(format!(
            "positive_weight must be positive, got {positive_weight}"
        )));
    }
    let mut rows = Vec::with_capacity(cohort.len());
    for id in cohort {
        rows.push(extractor.extract(id)?.0.to_vec());
    }
    let labels: Vec<u8> = positive.iter().map(|&p| u8::from(p)).collect();
    let weights: Vec<f64> = positive
        .iter()
        .map(|&p| if p { positive_weight } else { 1.0 })
        .collect();
    Dataset::from_rows(
        FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
        labels,
        weights,
        cohort.to_vec(),
    )
}

/// Writes `features.csv` (message_id plus canonical columns), `labels.csv`,
/// and `weights.csv`, aligned by the message_id column.
pub fn write_dataset_csv(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut features = std::io::BufWriter::new(std::fs::File::create(dir.join("features.csv"))?);
    writeln!(features, "message_id,{}", dataset.feature_names.join(","))?;
    for i in 0..dataset.n_rows() {
        let cells: Vec<String> = dataset.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(features, "{},{}", dataset.message_ids[i], cells.join(","))?;
    }
    let mut labels = std::io::BufWriter::new(std::fs::File::create(dir.join("labels.csv"))?);
    writeln!(labels, "message_id,label")?;
    for i in 0..dataset.n_rows() {
        writeln!(labels, "{},{}", dataset.message_ids[i], dataset.labels[i])?;
    }
    let mut weights = std::io::BufWriter::new(std::fs::File::create(dir.join("weights.csv"))?);
    writeln!(weights, "message_id,weight")?;
    for i in 0..dataset.n_rows() {
        writeln!(weights, "{},{}", dataset.message_ids[i], dataset.weights[i])?;
    }
    Ok(())
}

fn parse_csv_line(line: &str, file: &str, lineno: usize, expect: usize) -> Result<Vec<String>> {
    let cells: Vec<String> = line.split(',').map(str::to_string).collect();
    if cells.len() != expect {
        return Err(Error::Parse {
            file: file.to_string(),
            line: lineno,
            message: format!("expected {expect} cells, found {}", cells.len()),
        });
    }
    Ok(cells)
}

/// Reads a features.csv written by [`write_dataset_csv`]. Returns ids,
/// column names, and the row-major matrix.
pub fn read_features_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines.next().transpose()?.ok_or_else(|| Error::Parse {
        file: path.display().to_string(),
        line: 1,
        message: "missing header".to_string(),
    })?;
    let mut names: Vec<String> = header.split(',').map(str::to_string).collect();
    if names.first().map(String::as_str) != Some("message_id") {
        return Err(Error::Parse {
            file: path.display().to_string(),
            line: 1,
            message: "first column must be message_id".to_string(),
        });
    }
    names.remove(0);
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells = parse_csv_line(&line, &path.display().to_string(), i + 2, names.len() + 1)?;
        ids.push(cells[0].clone());
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in cells[1..].iter().enumerate() {
            row.push(cell.parse::<f64>().map_err(|e| Error::Parse {
                file: path.display().to_string(),
                line: i + 2,
                message: format!("column {}: {e}", names[j]),
            })?);
        }
        rows.push(row);
    }
    Ok((ids, names, rows))
}

/// Reads a two-column csv (`message_id,<value>`) into id/value pairs.
pub fn read_column_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cells = parse_csv_line(&line, &path.display().to_string(), i + 1, 2)?;
        let value = cells[1].parse::<f64>().map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((cells[0].clone(), value));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ActionRecord, CalendarSlot, MessageMeta};
    use crate::label::{label_corpus, SignalWindow};
    use crate::session::sessionize;

    fn meta(msg: &str, user: &str, delivery: i64) -> MessageMeta {
        MessageMeta {
            message_id: msg.to_string(),
            user_id: user.to_string(),
            delivery_time: delivery,
            unique_body_length: 42,
            num_recipients: 3,
            is_bulk: false,
            is_in_thread: true,
            is_human_sender: true,
            is_same_org: false,
            is_known_sender: true,
            is_important_sender: false,
            is_action_request: false,
            is_reply_request: false,
        }
    }

    fn mk(user: &str, msg: &str, action: ActionType, ts: i64) -> ActionRecord {
        ActionRecord {
            user_id: user.to_string(),
            message_id: msg.to_string(),
            action,
            timestamp: ts,
        }
    }

    #[test]
    fn registry_has_one_column_per_source_field() {
        // 30 source fields; the 3-way one-hot replaces one of them and the
        // calendar-present companion is appended.
        assert_eq!(FEATURE_COLUMNS.len(), SOURCE_FIELDS - 1 + 3 + 1);
        let unique: std::collections::BTreeSet<_> = FEATURE_COLUMNS.iter().collect();
        assert_eq!(unique.len(), FEATURE_COLUMNS.len());
        assert_eq!(FEATURE_COLUMNS[col::CALENDAR_PRESENT], "CalendarPresent");
        assert_eq!(FEATURE_COLUMNS[col::NUM_MESSAGES_SLTS], "NumMessagesSLTS");
    }

    #[test]
    fn mailbox_buckets_follow_thresholds() {
        assert_eq!(MailboxSizeBucket::from_count(9).ordinal(), 0);
        assert_eq!(MailboxSizeBucket::from_count(10).ordinal(), 1);
        assert_eq!(MailboxSizeBucket::from_count(24).ordinal(), 1);
        assert_eq!(MailboxSizeBucket::from_count(50).ordinal(), 2);
        assert_eq!(MailboxSizeBucket::from_count(99).ordinal(), 2);
        assert_eq!(MailboxSizeBucket::from_count(100).ordinal(), 3);
    }

    fn style_corpus(moves: bool, read_frac_high: bool) -> Corpus {
        let mut messages = std::collections::BTreeMap::new();
        let mut actions = Vec::new();
        let total = 10;
        let reads = if read_frac_high { 10 } else { 5 };
        for i in 0..total {
            let id = format!("m{i}");
            messages.insert(id.clone(), meta(&id, "u1", 0));
            if i < reads {
                actions.push(mk("u1", &id, ActionType::Read, 100 + i as i64 * 10_000));
                if moves {
                    actions.push(mk("u1", &id, ActionType::Move, 105 + i as i64 * 10_000));
                }
            }
        }
        Corpus::new(actions, messages, Default::default()).unwrap()
    }

    #[test]
    fn style_heuristic_matches_thresholds() {
        let t = StyleThresholds::default();
        let zero_inbox = style_corpus(true, false);
        assert_eq!(
            infer_profile("u1", &zero_inbox, &t).management_style,
            ManagementStyle::ZeroInbox
        );
        let piler = style_corpus(false, false);
        assert_eq!(
            infer_profile("u1", &piler, &t).management_style,
            ManagementStyle::Piler
        );
        let zero_unread = style_corpus(false, true);
        assert_eq!(
            infer_profile("u1", &zero_unread, &t).management_style,
            ManagementStyle::ZeroUnread
        );
    }

    fn extraction_fixture() -> (Corpus, i64) {
        // 2018-05-08 14:00 UTC is a Tuesday.
        let read_ts = 1525788000;
        let mut messages = std::collections::BTreeMap::new();
        messages.insert("m1".to_string(), meta("m1", "u1", read_ts - 3600));
        messages.insert("m2".to_string(), meta("m2", "u1", read_ts - 1800));
        messages.insert("m3".to_string(), meta("m3", "u1", read_ts - 900));
        let actions = vec![
            mk("u1", "m1", ActionType::Read, read_ts),
            mk("u1", "m1", ActionType::Flag, read_ts + 10),
            mk("u1", "m2", ActionType::Read, read_ts + 20),
        ];
        let mut calendar = std::collections::BTreeMap::new();
        let slot_start = (read_ts / 3600) * 3600;
        calendar.insert(
            ("u1".to_string(), slot_start),
            CalendarSlot {
                user_id: "u1".to_string(),
                slot_start,
                num_meetings: 2,
                num_meetings_organized: 1,
                frac_busy: 0.5,
                frac_free: 0.25,
                frac_tentative: 0.25,
                frac_ooo: 0.0,
            },
        );
        (Corpus::new(actions, messages, calendar).unwrap(), read_ts)
    }

    #[test]
    fn extract_counts_time_and_workload() {
        let (corpus, _) = extraction_fixture();
        let sessions = sessionize(&corpus, 600).unwrap();
        let labels = label_corpus(&corpus, &sessions, SignalWindow::ReadSession).unwrap();
        let profiles = infer_profiles(&corpus, &StyleThresholds::default());
        let x = FeatureExtractor::new(&corpus, &sessions, &labels, &profiles);

        let v = x.extract("m1").unwrap().0;
        assert_eq!(v[col::NUM_FLAG], 1.0);
        assert_eq!(v[col::NUM_RESPONSE], 0.0);
        assert_eq!(v[col::UNIQUE_BODY_LENGTH], 42.0);
        assert_eq!(v[col::NUM_RECIPIENTS], 3.0);
        // m2 and m3 are delivered and unhandled at m1's first read.
        assert_eq!(v[col::NUM_MESSAGES], 2.0);
        assert_eq!(v[col::NUM_MESSAGES_SLTS], 2.0);
        assert_eq!(v[col::HOUR_OF_DAY], 14.0);
        assert_eq!(v[col::DAY_OF_WEEK], 1.0);
        assert_eq!(v[col::DAY_OF_MONTH], 8.0);
        assert_eq!(v[col::MONTH], 5.0);
        assert_eq!(v[col::CALENDAR_PRESENT], 1.0);
        assert_eq!(v[col::NUM_MEETINGS], 2.0);
        assert_eq!(v[col::TIME_BUSY], 0.5);

        // m3 was never read.
        assert!(matches!(x.extract("m3"), Err(Error::NoFirstRead(_))));
        assert!(matches!(x.extract("zzz"), Err(Error::UnknownMessage(_))));
    }

    #[test]
    fn build_dataset_assigns_weights_and_dims() {
        let (corpus, _) = extraction_fixture();
        let sessions = sessionize(&corpus, 600).unwrap();
        let labels = label_corpus(&corpus, &sessions, SignalWindow::ReadSession).unwrap();
        let profiles = infer_profiles(&corpus, &StyleThresholds::default());
        let x = FeatureExtractor::new(&corpus, &sessions, &labels, &profiles);

        let cohort = vec!["m1".to_string(), "m2".to_string()];
        let ds = build_dataset(&x, &cohort, &[true, false], 10.0).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.n_cols(), FEATURE_COLUMNS.len());
        assert_eq!(ds.weights, vec![10.0, 1.0]);
        assert_eq!(ds.labels, vec![1, 0]);

        let all_one = build_dataset(&x, &cohort, &[true, false], 1.0).unwrap();
        assert_eq!(all_one.weights, vec![1.0, 1.0]);

        assert!(matches!(
            build_dataset(&x, &[], &[], 10.0),
            Err(Error::EmptyCohort(_))
        ));
    }

    #[test]
    fn drop_columns_and_subset_preserve_alignment() {
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let ds = Dataset::from_rows(
            names,
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
            vec![1, 0],
            vec![10.0, 1.0],
            vec!["m1".into(), "m2".into()],
        )
        .unwrap();
        let dropped = ds.drop_columns(&["b"]);
        assert_eq!(dropped.feature_names, vec!["a", "c"]);
        assert_eq!(dropped.row(1), &[4.0, 6.0]);
        let sub = ds.subset(&[1]);
        assert_eq!(sub.n_rows(), 1);
        assert_eq!(sub.message_ids, vec!["m2"]);
        assert_eq!(sub.row(0), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn csv_roundtrip() {
        let (corpus, _) = extraction_fixture();
        let sessions = sessionize(&corpus, 600).unwrap();
        let labels = label_corpus(&corpus, &sessions, SignalWindow::ReadSession).unwrap();
        let profiles = infer_profiles(&corpus, &StyleThresholds::default());
        let x = FeatureExtractor::new(&corpus, &sessions, &labels, &profiles);
        let cohort = vec!["m1".to_string(), "m2".to_string()];
        let ds = build_dataset(&x, &cohort, &[true, false], 10.0).unwrap();

        let dir = tempfile::tempdir().unwrap();
        write_dataset_csv(&ds, dir.path()).unwrap();
        let (ids, names, rows) = read_features_csv(&dir.path().join("features.csv")).unwrap();
        assert_eq!(ids, cohort);
        assert_eq!(names.len(), FEATURE_COLUMNS.len());
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.as_slice(), ds.row(i));
        }
        let labels_csv = read_column_csv(&dir.path().join("labels.csv")).unwrap();
        assert_eq!(labels_csv[0], ("m1".to_string(), 1.0));
        let weights_csv = read_column_csv(&dir.path().join("weights.csv")).unwrap();
        assert_eq!(weights_csv[0].1, 10.0);
    }

    #[test]
    fn action_features_ignore_records_outside_read_session() {
        let (corpus, read_ts) = extraction_fixture();
        // Add a later-session Move on m1; NumMove must stay 0.
        let mut actions = corpus.actions.clone();
        actions.push(mk("u1", "m1", ActionType::Move, read_ts + 50_000));
        let corpus2 =
            Corpus::new(actions, corpus.messages.clone(), corpus.calendar.clone()).unwrap();

        let sessions = sessionize(&corpus2, 600).unwrap();
        let labels = label_corpus(&corpus2, &sessions, SignalWindow::ReadSession).unwrap();
        let profiles = infer_profiles(&corpus2, &StyleThresholds::default());
        let x = FeatureExtractor::new(&corpus2, &sessions, &labels, &profiles);
        let v = x.extract("m1").unwrap().0;
        assert_eq!(v[col::NUM_MOVE], 0.0);
    }
}
