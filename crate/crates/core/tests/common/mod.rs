//! Shared test helpers: an adversarial random-corpus builder.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deferral_core::corpus::{ActionRecord, ActionType, Corpus, MessageMeta};

/// Builds a random corpus that exercises the awkward cases: never-read
/// messages, strong actions before any read, repeated reads, timestamp ties
/// across messages, and multi-user interleaving.
pub fn random_corpus(seed: u64, max_users: usize, max_messages_per_user: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut messages = BTreeMap::new();
    let mut actions: Vec<ActionRecord> = Vec::new();

    let n_users = rng.random_range(1..=max_users);
    for u in 0..n_users {
        let user_id = format!("u{u}");
        let n_msgs = rng.random_range(0..=max_messages_per_user);
        for m in 0..n_msgs {
            let message_id = format!("u{u}_m{m}");
            let delivery = rng.random_range(0..50_000);
            messages.insert(
                message_id.clone(),
                MessageMeta {
                    message_id: message_id.clone(),
                    user_id: user_id.clone(),
                    delivery_time: delivery,
                    unique_body_length: rng.random_range(0..2000),
                    num_recipients: rng.random_range(1..30),
                    is_bulk: rng.random_bool(0.3),
                    is_in_thread: rng.random_bool(0.4),
                    is_human_sender: rng.random_bool(0.8),
                    is_same_org: rng.random_bool(0.5),
                    is_known_sender: rng.random_bool(0.7),
                    is_important_sender: rng.random_bool(0.4),
                    is_action_request: rng.random_bool(0.1),
                    is_reply_request: rng.random_bool(0.15),
                },
            );
            // Between zero and six actions, any types, any order.
            let n_actions = rng.random_range(0..=6);
            let mut used: Vec<(ActionType, i64)> = Vec::new();
            for _ in 0..n_actions {
                let action = ActionType::ALL[rng.random_range(0..ActionType::ALL.len())];
                let ts = delivery + rng.random_range(0..80_000);
                if used.contains(&(action, ts)) {
                    continue;
                }
                used.push((action, ts));
                actions.push(ActionRecord {
                    user_id: user_id.clone(),
                    message_id: message_id.clone(),
                    action,
                    timestamp: ts,
                });
            }
        }
    }
    Corpus::new(actions, messages, BTreeMap::new()).expect("random corpus is valid")
}
