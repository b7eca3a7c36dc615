//! The per-user triage simulator.
//!
//! Each user runs on an independent RNG stream derived from the master
//! seed, so generation parallelizes by user and the merged corpus is
//! byte-identical regardless of thread count.
//!
//! Timeline construction alternates inter-session gaps (at least 601
//! seconds, so the sessionizer's strict 600-second rule recovers the plan
//! exactly) with sessions whose internal gaps never exceed 600 seconds.
//! Messages arrive only between sessions; each is read in a later session
//! (drain sessions appended past the arrival horizon guarantee every
//! message a first Read and every planned revisit its session).

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Poisson};
use rayon::prelude::*;

use crate::corpus::{ActionRecord, ActionType, CalendarSlot, Corpus, MessageMeta};
use crate::error::Result;
use crate::synth::{ClassProfile, GroundTruth, Intent, SynthConfig, SynthPlan, TruthRecord};
use crate::util::{logit, mix_seed, sigmoid};

const BUSINESS_HOURS: std::ops::Range<i64> = 9..17;
const OOO_DAY_PROB: f64 = 0.03;
const TENTATIVE_QUARTER_PROB: f64 = 0.15;
const ORGANIZED_MEETING_PROB: f64 = 0.4;
/// Probability of reading a pending message in the current session.
const READ_NOW_PILER: f64 = 0.55;
const READ_NOW_ZERO_INBOX: f64 = 0.90;
const READ_NOW_ZERO_UNREAD: f64 = 0.95;

#[derive(Clone, Copy)]
enum Style {
    Piler,
    ZeroInbox,
    ZeroUnread,
}

impl Style {
    fn read_now_prob(self) -> f64 {
        match self {
            Style::Piler => READ_NOW_PILER,
            Style::ZeroInbox => READ_NOW_ZERO_INBOX,
            Style::ZeroUnread => READ_NOW_ZERO_UNREAD,
        }
    }
}

struct PendingMsg {
    seq: usize,
    delivery_ts: i64,
    body_len: u32,
}

struct AgendaItem {
    due_ordinal: usize,
    seq: usize,
    actions: Vec<ActionType>,
}

#[derive(Default)]
struct UserOutput {
    actions: Vec<ActionRecord>,
    messages: Vec<MessageMeta>,
    slots: Vec<CalendarSlot>,
    truth: Vec<(String, TruthRecord)>,
    sessions: Vec<(i64, i64, usize)>,
    unhandled: Vec<(String, u32)>,
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive lambda").sample(rng) as u64
}

fn sample_strong(rng: &mut ChaCha8Rng) -> ActionType {
    let u: f64 = rng.random();
    if u < 0.7 {
        ActionType::Reply
    } else if u < 0.9 {
        ActionType::ReplyAll
    } else {
        ActionType::Forward
    }
}

/// Fixed emission order for per-window strategy actions.
fn strategy_order(profile: &ClassProfile) -> [(ActionType, crate::synth::SessionRates); 7] {
    let s = &profile.strategy;
    [
        (ActionType::Flag, s.flag),
        (ActionType::FlagComplete, s.flag_complete),
        (ActionType::MarkAsUnread, s.mark_unread),
        (ActionType::Move, s.move_to_folder),
        (ActionType::Delete, s.delete),
        (ActionType::OpenedAnAttachment, s.opened_attachment),
        (ActionType::LinkClicked, s.link_clicked),
    ]
}

fn sample_meta(
    rng: &mut ChaCha8Rng,
    profile: &ClassProfile,
    message_id: String,
    user_id: String,
    delivery_ts: i64,
    body_len: u32,
) -> MessageMeta {
    let m = &profile.meta;
    let extra = poisson(rng, m.mean_recipients - 1.0);
    MessageMeta {
        message_id,
        user_id,
        delivery_time: delivery_ts,
        unique_body_length: body_len,
        num_recipients: 1 + extra as u32,
        is_bulk: rng.random_bool(m.bulk_rate),
        is_in_thread: rng.random_bool(m.in_thread_rate),
        is_human_sender: rng.random_bool(m.human_rate),
        is_same_org: rng.random_bool(m.same_org_rate),
        is_known_sender: rng.random_bool(m.known_rate),
        is_important_sender: rng.random_bool(m.important_rate),
        is_action_request: rng.random_bool(m.action_request_rate),
        is_reply_request: rng.random_bool(m.reply_request_rate),
    }
}

fn generate_calendar(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    user_id: &str,
) -> (Vec<CalendarSlot>, BTreeMap<i64, u32>) {
    let mut slots = Vec::new();
    let mut meetings_at = BTreeMap::new();
    for day in 0..config.days as i64 {
        let day_start = config.start_ts + day * 86_400;
        let ooo_day = rng.random_bool(OOO_DAY_PROB);
        let mut per_hour = [0u32; 8];
        if !ooo_day {
            let n = poisson(rng, config.meetings_per_day);
            for _ in 0..n {
                per_hour[rng.random_range(0..8)] += 1;
            }
        }
        for (h, &m) in per_hour.iter().enumerate() {
            let slot_start = day_start + (BUSINESS_HOURS.start + h as i64) * 3600;
            let (busy_q, tent_q, ooo_q) = if ooo_day {
                (0u32, 0u32, 4u32)
            } else {
                let busy = (m * 2).min(4);
                let tent = if busy < 4 && rng.random_bool(TENTATIVE_QUARTER_PROB) {
                    1
                } else {
                    0
                };
                (busy, tent, 0)
            };
            let organized = (0..m)
                .filter(|_| rng.random_bool(ORGANIZED_MEETING_PROB))
                .count() as u32;
            // Quarter-hour occupancy keeps the fractions exact in f64.
            slots.push(CalendarSlot {
                user_id: user_id.to_string(),
                slot_start,
                num_meetings: m,
                num_meetings_organized: organized,
                frac_busy: f64::from(busy_q) / 4.0,
                frac_free: f64::from(4 - busy_q - tent_q - ooo_q) / 4.0,
                frac_tentative: f64::from(tent_q) / 4.0,
                frac_ooo: f64::from(ooo_q) / 4.0,
            });
            meetings_at.insert(slot_start, m);
        }
    }
    (slots, meetings_at)
}

/// Bounded geometric skip: how many sessions past the next one a revisit
/// waits.
fn revisit_skip(rng: &mut ChaCha8Rng) -> usize {
    let mut extra = 0;
    while extra < 4 && rng.random_bool(0.45) {
        extra += 1;
    }
    extra
}

/// Within-session step: at most 600 seconds, occasionally exactly 600 to
/// exercise the boundary.
fn within_gap(rng: &mut ChaCha8Rng) -> i64 {
    if rng.random_bool(0.02) {
        600
    } else {
        rng.random_range(1..=30)
    }
}

fn simulate_user(config: &SynthConfig, user_idx: usize) -> UserOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, user_idx as u64));
    let user_id = format!("u{user_idx:05}");
    let mut out = UserOutput::default();

    let style = {
        let u: f64 = rng.random();
        if u < config.style_mix.piler {
            Style::Piler
        } else if u < config.style_mix.piler + config.style_mix.zero_inbox {
            Style::ZeroInbox
        } else {
            Style::ZeroUnread
        }
    };
    let read_now_prob = style.read_now_prob();

    let (slots, meetings_at) = generate_calendar(&mut rng, config, &user_id);
    out.slots = slots;

    let body_dist = if config.body_ln_sd > 0.0 {
        Some(LogNormal::new(config.body_ln_mean, config.body_ln_sd).expect("valid lognormal"))
    } else {
        None
    };
    let gap_dist = if config.mean_intersession_gap_secs > 0.0 {
        Some(Exp::new(1.0 / config.mean_intersession_gap_secs).expect("valid exp"))
    } else {
        None
    };
    let arrival_rate = config.arrivals_per_user_day / 86_400.0;
    let span_end = config.start_ts + config.days as i64 * 86_400;

    let mut pending: VecDeque<PendingMsg> = VecDeque::new();
    let mut agenda: Vec<AgendaItem> = Vec::new();
    let mut msg_ids: Vec<String> = Vec::new();
    let mut cursor = config.start_ts + rng.random_range(0..7200);
    let mut committed = 0usize;
    let mut seq = 0usize;

    loop {
        let extra_gap = gap_dist.map_or(0, |d| d.sample(&mut rng) as i64);
        let session_start = cursor + 601 + extra_gap;
        let drain = session_start >= span_end;
        if drain && pending.is_empty() && agenda.is_empty() {
            break;
        }

        // Deliveries arrive in the open gap interval, up to the horizon.
        let window_hi = session_start.min(span_end);
        if window_hi > cursor + 1 && arrival_rate > 0.0 {
            let n = poisson(&mut rng, arrival_rate * (window_hi - cursor - 1) as f64);
            let mut times: Vec<i64> = (0..n)
                .map(|_| rng.random_range(cursor + 1..window_hi))
                .collect();
            times.sort_unstable();
            for delivery_ts in times {
                let body_len = body_dist
                    .map(|d| d.sample(&mut rng).round())
                    .unwrap_or(config.body_ln_mean.exp().round())
                    .clamp(1.0, 1e6) as u32;
                msg_ids.push(format!("m{user_idx:05}_{seq:06}"));
                pending.push_back(PendingMsg {
                    seq,
                    delivery_ts,
                    body_len,
                });
                seq += 1;
            }
        }

        let mut t = session_start;
        let mut events: Vec<ActionRecord> = Vec::new();
        let emit = |events: &mut Vec<ActionRecord>,
                        t: &mut i64,
                        rng: &mut ChaCha8Rng,
                        msg: &str,
                        action: ActionType| {
            events.push(ActionRecord {
                user_id: user_id.clone(),
                message_id: msg.to_string(),
                action,
                timestamp: *t,
            });
            *t += within_gap(rng);
        };

        // Revisit agenda first: due items, or everything when draining.
        let mut due: Vec<AgendaItem> = Vec::new();
        agenda.retain_mut(|item| {
            if drain || item.due_ordinal <= committed {
                due.push(AgendaItem {
                    due_ordinal: item.due_ordinal,
                    seq: item.seq,
                    actions: std::mem::take(&mut item.actions),
                });
                false
            } else {
                true
            }
        });
        due.sort_by_key(|item| (item.due_ordinal, item.seq));
        for item in due {
            let msg = msg_ids[item.seq].clone();
            for action in item.actions {
                emit(&mut events, &mut t, &mut rng, &msg, action);
            }
        }

        // Triage: read pending messages in delivery order.
        let pending_at_start = pending.len() as u32;
        let mut reads_done = 0u32;
        let mut kept: VecDeque<PendingMsg> = VecDeque::new();
        for msg in std::mem::take(&mut pending) {
            if !(drain || rng.random_bool(read_now_prob)) {
                kept.push_back(msg);
                continue;
            }
            reads_done += 1;
            let unhandled = pending_at_start - reads_done;
            let msg_id = msg_ids[msg.seq].clone();

            let slot_start = t.div_euclid(3600) * 3600;
            let meetings = meetings_at.get(&slot_start).copied().unwrap_or(0);
            let intent_logit = logit(config.base_defer_prob)
                + config.workload_slope * f64::from(unhandled)
                + config.body_length_slope
                    * ((1.0 + f64::from(msg.body_len)).ln() - config.body_ln_mean)
                + config.meeting_slope * f64::from(meetings);
            let deferred = rng.random_bool(sigmoid(intent_logit).clamp(0.0, 1.0));

            let (profile, truth) = if deferred {
                let completed = rng.random_bool(config.completion_prob);
                let planned = completed.then(|| sample_strong(&mut rng));
                (
                    &config.deferred,
                    TruthRecord {
                        intent: Intent::Deferred,
                        completed,
                        planned_strong_action: planned,
                    },
                )
            } else if rng.random_bool(config.nondeferred_response_prob) {
                (
                    &config.responder,
                    TruthRecord {
                        intent: Intent::NonDeferred,
                        completed: false,
                        planned_strong_action: None,
                    },
                )
            } else {
                (
                    &config.silent,
                    TruthRecord {
                        intent: Intent::NonDeferred,
                        completed: false,
                        planned_strong_action: None,
                    },
                )
            };

            out.messages.push(sample_meta(
                &mut rng,
                profile,
                msg_id.clone(),
                user_id.clone(),
                msg.delivery_ts,
                msg.body_len,
            ));
            out.truth.push((msg_id.clone(), truth));
            out.unhandled.push((msg_id.clone(), unhandled));

            emit(&mut events, &mut t, &mut rng, &msg_id, ActionType::Read);
            for (action, rates) in strategy_order(profile) {
                if rng.random_bool(rates.read) {
                    emit(&mut events, &mut t, &mut rng, &msg_id, action);
                }
            }
            // Immediate responders act inside the first-read session.
            if truth.intent == Intent::NonDeferred && std::ptr::eq(profile, &config.responder) {
                let strong = sample_strong(&mut rng);
                emit(&mut events, &mut t, &mut rng, &msg_id, strong);
            }

            let mut revisit_actions = Vec::new();
            if let Some(strong) = truth.planned_strong_action {
                revisit_actions.push(strong);
            }
            for (action, rates) in strategy_order(profile) {
                if rng.random_bool(rates.revisit) {
                    revisit_actions.push(action);
                }
            }
            if !revisit_actions.is_empty() {
                agenda.push(AgendaItem {
                    due_ordinal: committed + 1 + revisit_skip(&mut rng),
                    seq: msg.seq,
                    actions: revisit_actions,
                });
            }
        }
        pending = kept;

        if events.is_empty() {
            cursor = session_start;
            continue;
        }
        let end_ts = events.last().expect("nonempty").timestamp;
        out.sessions.push((session_start, end_ts, events.len()));
        out.actions.extend(events);
        committed += 1;
        cursor = end_ts;
    }

    debug_assert!(pending.is_empty() && agenda.is_empty());
    out
}

/// Generates a corpus and its latent ground truth. Deterministic given the
/// configured seed.
pub fn generate(config: &SynthConfig) -> Result<(Corpus, GroundTruth)> {
    let (corpus, truth, _) = generate_with_plan(config)?;
    Ok((corpus, truth))
}

/// Like [`generate`], also returning the generator's session plan and
/// planted per-message unhandled counts for oracle tests.
pub fn generate_with_plan(config: &SynthConfig) -> Result<(Corpus, GroundTruth, SynthPlan)> {
    config.validate()?;
    let outputs: Vec<UserOutput> = (0..config.num_users)
        .into_par_iter()
        .map(|i| simulate_user(config, i))
        .collect();

    let mut actions = Vec::new();
    let mut messages = BTreeMap::new();
    let mut calendar = BTreeMap::new();
    let mut truth = GroundTruth::default();
    let mut plan = SynthPlan::default();
    for (i, mut user) in outputs.into_iter().enumerate() {
        let user_id = format!("u{i:05}");
        actions.append(&mut user.actions);
        for m in user.messages {
            messages.insert(m.message_id.clone(), m);
        }
        for s in user.slots {
            calendar.insert((s.user_id.clone(), s.slot_start), s);
        }
        for (id, rec) in user.truth {
            truth.records.insert(id, rec);
        }
        plan.sessions.insert(user_id, user.sessions);
        for (id, count) in user.unhandled {
            plan.unhandled_at_first_read.insert(id, count);
        }
    }

    let corpus = Corpus::new(actions, messages, calendar)?;
    Ok((corpus, truth, plan))
}
