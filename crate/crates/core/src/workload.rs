//! Unhandled-message counts: the workload proxy.
//!
//! A message counts as *unhandled* at time `t` for a user when it was
//! delivered before `t` and the user has taken no action on it before `t`.
//! The message whose read triggered the query is excluded from its own
//! count.

use std::collections::BTreeMap;

use crate::corpus::Corpus;

struct UserWorkload<'c> {
    /// (delivery_time, message_id) sorted.
    deliveries: Vec<(i64, &'c str)>,
    /// First action timestamp aligned with `deliveries`; None when the
    /// message never receives an action.
    first_action: Vec<Option<i64>>,
    /// Sorted first-action timestamps (acted messages only).
    first_action_sorted: Vec<i64>,
}

struct MessageEntry<'c> {
    user_id: &'c str,
    delivery_time: i64,
    first_action: Option<i64>,
}

pub struct WorkloadIndex<'c> {
    per_user: BTreeMap<&'c str, UserWorkload<'c>>,
    per_message: BTreeMap<&'c str, MessageEntry<'c>>,
}

impl<'c> WorkloadIndex<'c> {
    pub fn new(corpus: &'c Corpus) -> Self {
        let mut first_action: BTreeMap<&str, i64> = BTreeMap::new();
        for a in &corpus.actions {
            first_action
                .entry(a.message_id.as_str())
                .and_modify(|ts| *ts = (*ts).min(a.timestamp))
                .or_insert(a.timestamp);
        }

        let mut per_message = BTreeMap::new();
        let mut grouped: BTreeMap<&str, Vec<(i64, &str)>> = BTreeMap::new();
        for meta in corpus.messages.values() {
            let fa = first_action.get(meta.message_id.as_str()).copied();
            per_message.insert(
                meta.message_id.as_str(),
                MessageEntry {
                    user_id: meta.user_id.as_str(),
                    delivery_time: meta.delivery_time,
                    first_action: fa,
                },
            );
            grouped
                .entry(meta.user_id.as_str())
                .or_default()
                .push((meta.delivery_time, meta.message_id.as_str()));
        }

        let mut per_user = BTreeMap::new();
        for (user, mut deliveries) in grouped {
            deliveries.sort_unstable();
            let fa: Vec<Option<i64>> = deliveries
                .iter()
                .map(|(_, id)| first_action.get(id).copied())
                .collect();
            let mut fas: Vec<i64> = fa.iter().flatten().copied().collect();
            fas.sort_unstable();
            per_user.insert(
                user,
                UserWorkload {
                    deliveries,
                    first_action: fa,
                    first_action_sorted: fas,
                },
            );
        }
        WorkloadIndex {
            per_user,
            per_message,
        }
    }

    /// Number of other messages delivered to the message's owner before `at_ts`
    /// with no action before `at_ts`. `None` when the message is unknown.
    pub fn unhandled_count(&self, message_id: &str, at_ts: i64) -> Option<u32> {
        let entry = self.per_message.get(message_id)?;
        let user = self.per_user.get(entry.user_id)?;
        let delivered = user.deliveries.partition_point(|(ts, _)| *ts < at_ts);
        // First action at or after delivery, so every acted-before-t message
        // was also delivered before t.
        let acted = user.first_action_sorted.partition_point(|ts| *ts < at_ts);
        let self_pending = entry.delivery_time < at_ts
            && entry.first_action.is_none_or(|fa| fa >= at_ts);
        Some((delivered - acted - usize::from(self_pending)) as u32)
    }

    /// Like [`unhandled_count`](Self::unhandled_count), restricted to
    /// messages delivered strictly after `lower_exclusive`.
    pub fn unhandled_count_since(
        &self,
        message_id: &str,
        lower_exclusive: i64,
        at_ts: i64,
    ) -> Option<u32> {
        let entry = self.per_message.get(message_id)?;
        let user = self.per_user.get(entry.user_id)?;
        let lo = user
            .deliveries
            .partition_point(|(ts, _)| *ts <= lower_exclusive);
        let hi = user.deliveries.partition_point(|(ts, _)| *ts < at_ts);
        let mut count = 0u32;
        for i in lo..hi {
            let (_, id) = user.deliveries[i];
            if id == message_id {
                continue;
            }
            if user.first_action[i].is_none_or(|fa| fa >= at_ts) {
                count += 1;
            }
        }
        Some(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ActionRecord, ActionType, MessageMeta};

    fn meta(msg: &str, user: &str, delivery: i64) -> MessageMeta {
        MessageMeta {
            message_id: msg.to_string(),
            user_id: user.to_string(),
            delivery_time: delivery,
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

    /// Quadratic restatement of the definition, used as the oracle.
    fn brute_force(corpus: &Corpus, message_id: &str, at_ts: i64, lower: Option<i64>) -> u32 {
        let owner = &corpus.messages[message_id].user_id;
        corpus
            .messages
            .values()
            .filter(|m| {
                m.user_id == *owner
                    && m.message_id != message_id
                    && m.delivery_time < at_ts
                    && lower.is_none_or(|lo| m.delivery_time > lo)
                    && !corpus.actions.iter().any(|a| {
                        a.user_id == *owner
                            && a.message_id == m.message_id
                            && a.timestamp < at_ts
                    })
            })
            .count() as u32
    }

    #[test]
    fn matches_brute_force_on_a_mixed_corpus() {
        let mut messages = std::collections::BTreeMap::new();
        let deliveries = [
            ("m1", 0),
            ("m2", 10),
            ("m3", 20),
            ("m4", 30),
            ("m5", 1000),
        ];
        for (id, ts) in deliveries {
            messages.insert(id.to_string(), meta(id, "u1", ts));
        }
        let actions = vec![
            ActionRecord {
                user_id: "u1".into(),
                message_id: "m1".into(),
                action: ActionType::Read,
                timestamp: 50,
            },
            ActionRecord {
                user_id: "u1".into(),
                message_id: "m2".into(),
                action: ActionType::Read,
                timestamp: 100,
            },
            ActionRecord {
                user_id: "u1".into(),
                message_id: "m3".into(),
                action: ActionType::Read,
                timestamp: 2000,
            },
        ];
        let corpus = Corpus::new(actions, messages, Default::default()).unwrap();
        let index = WorkloadIndex::new(&corpus);

        for (id, _) in deliveries {
            for at in [1, 25, 50, 100, 999, 1001, 2000, 3000] {
                assert_eq!(
                    index.unhandled_count(id, at),
                    Some(brute_force(&corpus, id, at, None)),
                    "message {id} at {at}"
                );
                for lo in [-1, 5, 25, 500] {
                    assert_eq!(
                        index.unhandled_count_since(id, lo, at),
                        Some(brute_force(&corpus, id, at, Some(lo))),
                        "message {id} at {at} since {lo}"
                    );
                }
            }
        }
    }

    #[test]
    fn unknown_message_yields_none() {
        let corpus = Corpus::default();
        let index = WorkloadIndex::new(&corpus);
        assert_eq!(index.unhandled_count("nope", 10), None);
    }
}
