//! Generator configuration and its flat key-value file format.
//!
//! The default configuration is *calibrated*: per-class parameter values are
//! solved so that the statistics measured on labeled classes land on the
//! reference targets in [`super::calibrate::targets`], accounting for two
//! mixing effects:
//!
//! - deferred intents that never complete carry deferred-style metadata but
//!   are labeled non-deferred, so non-deferred parameters are back-solved
//!   from the labeled-class target and the contamination share;
//! - immediate responders are a distinct sub-class of non-deferred messages
//!   (they drive the replied-to comparison), so non-deferred parameters
//!   split into responder and silent values around the responder share.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::calibrate::targets;

/// Probabilities of latent management styles. Style affects how eagerly a
/// user drains pending mail each session (and therefore the spread of
/// unhandled counts); strategy-action rates are intent-keyed, not
/// style-keyed, so calibrated statistics are unaffected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleMix {
    pub piler: f64,
    pub zero_inbox: f64,
    pub zero_unread: f64,
}

/// Metadata distribution for one latent message class. Recipient counts are
/// `1 + Poisson(mean_recipients - 1)`; the rest are Bernoulli rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaParams {
    pub mean_recipients: f64,
    pub action_request_rate: f64,
    pub reply_request_rate: f64,
    pub human_rate: f64,
    pub same_org_rate: f64,
    pub known_rate: f64,
    pub important_rate: f64,
    pub bulk_rate: f64,
    pub in_thread_rate: f64,
}

/// Probability that one action of a given type is emitted in the first-read
/// session (`read`) and in a later session (`revisit`). Because at most one
/// action per type is emitted per window, these are exactly the per-message
/// observation probabilities the statistics measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionRates {
    pub read: f64,
    pub revisit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyRates {
    pub flag: SessionRates,
    pub flag_complete: SessionRates,
    pub mark_unread: SessionRates,
    pub move_to_folder: SessionRates,
    pub delete: SessionRates,
    pub opened_attachment: SessionRates,
    pub link_clicked: SessionRates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub meta: MetaParams,
    pub strategy: StrategyRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_users: usize,
    pub days: usize,
    pub seed: u64,
    /// Corpus epoch, seconds since Unix epoch UTC.
    pub start_ts: i64,
    pub arrivals_per_user_day: f64,
    /// Deferral-intent probability at zero workload contribution.
    pub base_defer_prob: f64,
    /// Logit units per unhandled message at first read.
    pub workload_slope: f64,
    /// Logit units per unit of `ln(1 + body_words) - body_ln_mean`.
    pub body_length_slope: f64,
    /// Logit units per meeting in the calendar slot of the first read.
    pub meeting_slope: f64,
    /// Probability a deferred intent ever completes (receives its strong
    /// action in a later session).
    pub completion_prob: f64,
    /// Probability a non-deferred message receives an immediate strong
    /// action inside its first-read session.
    pub nondeferred_response_prob: f64,
    pub style_mix: StyleMix,
    /// Mean extra gap between sessions, beyond the mandatory 601 seconds.
    pub mean_intersession_gap_secs: f64,
    pub meetings_per_day: f64,
    /// Body word counts are lognormal: `ln(words) ~ N(body_ln_mean, body_ln_sd)`.
    pub body_ln_mean: f64,
    pub body_ln_sd: f64,
    pub deferred: ClassProfile,
    pub responder: ClassProfile,
    pub silent: ClassProfile,
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
    }
    Ok(())
}

impl MetaParams {
    fn validate(&self, prefix: &str) -> Result<()> {
        if self.mean_recipients < 1.0 {
            return Err(Error::Config(format!(
                "{prefix}.mean_recipients must be >= 1, got {}",
                self.mean_recipients
            )));
        }
        for (name, v) in [
            ("action_request_rate", self.action_request_rate),
            ("reply_request_rate", self.reply_request_rate),
            ("human_rate", self.human_rate),
            ("same_org_rate", self.same_org_rate),
            ("known_rate", self.known_rate),
            ("important_rate", self.important_rate),
            ("bulk_rate", self.bulk_rate),
            ("in_thread_rate", self.in_thread_rate),
        ] {
            check_prob(&format!("{prefix}.{name}"), v)?;
        }
        Ok(())
    }
}

impl StrategyRates {
    pub fn get(&self, name: &str) -> Option<SessionRates> {
        match name {
            "Flag" => Some(self.flag),
            "FlagComplete" => Some(self.flag_complete),
            "MarkAsUnread" => Some(self.mark_unread),
            "Move" => Some(self.move_to_folder),
            "Delete" => Some(self.delete),
            "OpenedAnAttachment" => Some(self.opened_attachment),
            "LinkClicked" => Some(self.link_clicked),
            _ => None,
        }
    }

    fn validate(&self, prefix: &str) -> Result<()> {
        for (name, r) in [
            ("flag", self.flag),
            ("flag_complete", self.flag_complete),
            ("mark_unread", self.mark_unread),
            ("move_to_folder", self.move_to_folder),
            ("delete", self.delete),
            ("opened_attachment", self.opened_attachment),
            ("link_clicked", self.link_clicked),
        ] {
            check_prob(&format!("{prefix}.{name}.read"), r.read)?;
            check_prob(&format!("{prefix}.{name}.revisit"), r.revisit)?;
        }
        Ok(())
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users < 1 {
            return Err(Error::Config("num_users must be >= 1".to_string()));
        }
        if self.days < 1 {
            return Err(Error::Config("days must be >= 1".to_string()));
        }
        if self.arrivals_per_user_day < 0.0 {
            return Err(Error::Config(
                "arrivals_per_user_day must be nonnegative".to_string(),
            ));
        }
        if self.mean_intersession_gap_secs < 0.0 {
            return Err(Error::Config(
                "mean_intersession_gap_secs must be nonnegative".to_string(),
            ));
        }
        if self.meetings_per_day < 0.0 {
            return Err(Error::Config("meetings_per_day must be nonnegative".to_string()));
        }
        if self.body_ln_sd < 0.0 {
            return Err(Error::Config("body_ln_sd must be nonnegative".to_string()));
        }
        check_prob("base_defer_prob", self.base_defer_prob)?;
        check_prob("completion_prob", self.completion_prob)?;
        check_prob("nondeferred_response_prob", self.nondeferred_response_prob)?;
        check_prob("style_mix.piler", self.style_mix.piler)?;
        check_prob("style_mix.zero_inbox", self.style_mix.zero_inbox)?;
        check_prob("style_mix.zero_unread", self.style_mix.zero_unread)?;
        let mix = self.style_mix.piler + self.style_mix.zero_inbox + self.style_mix.zero_unread;
        if (mix - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "style_mix must sum to 1, got {mix}"
            )));
        }
        self.deferred.meta.validate("deferred.meta")?;
        self.responder.meta.validate("responder.meta")?;
        self.silent.meta.validate("silent.meta")?;
        self.deferred.strategy.validate("deferred.strategy")?;
        self.responder.strategy.validate("responder.strategy")?;
        self.silent.strategy.validate("silent.strategy")?;
        Ok(())
    }

    /// Share of messages labeled deferred under this configuration when the
    /// intent logit has no covariate contributions.
    pub fn expected_labeled_deferral_rate(&self) -> f64 {
        self.base_defer_prob * self.completion_prob
    }

    /// The calibrated default: 2000 users over two weeks (~224k messages),
    /// parameter values solved from the reference targets.
    pub fn default_calibrated() -> SynthConfig {
        let b = 0.05; // deferral-intent rate
        let c = 0.6; // completion probability -> labeled rate b*c = 0.03
        let q = 0.10; // responder share within non-deferred intents

        let labeled_deferred = b * c;
        let uncompleted = b * (1.0 - c);
        let labeled_non_deferred = 1.0 - labeled_deferred;
        // Weight of replied-to messages: completed deferrals + responders.
        let replied_weight = labeled_deferred + (1.0 - b) * q;

        // Back out the intent-level value from a labeled-class target pair:
        // labeled non-deferred mixes intent-non-deferred with uncompleted
        // deferred intents.
        let intent_n = |t_d: f64, t_n: f64| -> f64 {
            (t_n * labeled_non_deferred - uncompleted * t_d) / (1.0 - b)
        };
        // Split an intent-level value into (responder, silent) around a
        // chosen responder value.
        let silent_of = |v_n: f64, v_resp: f64| -> f64 { (v_n - q * v_resp) / (1.0 - q) };

        // Metadata: responder values chosen so the replied-to mixture lands
        // on its target where one exists, plausible otherwise.
        let recip_resp = (targets::RECIPIENTS_REPLIED_TO * replied_weight
            - labeled_deferred * targets::RECIPIENTS_DEFERRED)
            / ((1.0 - b) * q);
        let recip_n = intent_n(targets::RECIPIENTS_DEFERRED, targets::RECIPIENTS_NON_DEFERRED);
        let action_req_n =
            intent_n(targets::ACTION_REQUEST_DEFERRED, targets::ACTION_REQUEST_NON_DEFERRED);
        let reply_req_n =
            intent_n(targets::REPLY_REQUEST_DEFERRED, targets::REPLY_REQUEST_NON_DEFERRED);
        let human_n = intent_n(targets::HUMAN_DEFERRED, targets::HUMAN_NON_DEFERRED);
        let known_n = intent_n(targets::KNOWN_DEFERRED, targets::KNOWN_NON_DEFERRED);
        let important_n = intent_n(targets::IMPORTANT_DEFERRED, targets::IMPORTANT_NON_DEFERRED);

        let responder_meta = MetaParams {
            mean_recipients: recip_resp,
            action_request_rate: 0.064,
            reply_request_rate: 0.214,
            human_rate: 0.875,
            same_org_rate: 0.60,
            known_rate: 0.635,
            important_rate: 0.465,
            bulk_rate: 0.08,
            in_thread_rate: 0.55,
        };
        let silent_meta = MetaParams {
            mean_recipients: silent_of(recip_n, responder_meta.mean_recipients),
            action_request_rate: silent_of(action_req_n, responder_meta.action_request_rate),
            reply_request_rate: silent_of(reply_req_n, responder_meta.reply_request_rate),
            human_rate: silent_of(human_n, responder_meta.human_rate),
            same_org_rate: 0.55,
            known_rate: silent_of(known_n, responder_meta.known_rate),
            important_rate: silent_of(important_n, responder_meta.important_rate),
            bulk_rate: 0.35,
            in_thread_rate: 0.40,
        };
        let deferred_meta = MetaParams {
            mean_recipients: targets::RECIPIENTS_DEFERRED,
            action_request_rate: targets::ACTION_REQUEST_DEFERRED,
            reply_request_rate: targets::REPLY_REQUEST_DEFERRED,
            human_rate: targets::HUMAN_DEFERRED,
            same_org_rate: 0.62,
            known_rate: targets::KNOWN_DEFERRED,
            important_rate: targets::IMPORTANT_DEFERRED,
            bulk_rate: 0.12,
            in_thread_rate: 0.50,
        };

        // Observed-anywhere probability 1-(1-r)(1-v): pick the read-window
        // rate and solve the revisit rate for the target marginal.
        let revisit_for = |any: f64, read: f64| -> f64 { 1.0 - (1.0 - any) / (1.0 - read) };

        // Deferred strategy rates. Flag and MarkAsUnread hit the
        // observed-anywhere targets; Move hits the read/revisit split
        // targets directly.
        let deferred_strategy = StrategyRates {
            flag: SessionRates {
                read: 0.030,
                revisit: revisit_for(targets::FLAG_DEFERRED, 0.030),
            },
            mark_unread: SessionRates {
                read: 0.046,
                revisit: revisit_for(targets::MARK_UNREAD_DEFERRED, 0.046),
            },
            move_to_folder: SessionRates {
                read: targets::MOVE_DEFERRED_READ,
                revisit: targets::MOVE_DEFERRED_REVISIT,
            },
            delete: SessionRates { read: 0.004, revisit: 0.054 },
            flag_complete: SessionRates { read: 0.001, revisit: 0.011 },
            link_clicked: SessionRates { read: 0.017, revisit: 0.014 },
            opened_attachment: SessionRates { read: 0.139, revisit: 0.096 },
        };

        // Non-deferred Flag: intent-level observed-anywhere rate, uniform
        // across responders and silents.
        let flag_n_any = intent_n(targets::FLAG_DEFERRED, targets::FLAG_NON_DEFERRED);
        let flag_n = SessionRates {
            read: 0.006,
            revisit: revisit_for(flag_n_any, 0.006),
        };
        // Non-deferred MarkAsUnread: responders almost never mark a message
        // unread after replying to it; their rate is solved from the
        // replied-to target and the silent rate absorbs the rest.
        let mu_n_any = intent_n(targets::MARK_UNREAD_DEFERRED, targets::MARK_UNREAD_NON_DEFERRED);
        let mu_resp_any = (targets::MARK_UNREAD_REPLIED_TO * replied_weight
            - labeled_deferred * targets::MARK_UNREAD_DEFERRED)
            / ((1.0 - b) * q);
        let mu_silent_any = silent_of(mu_n_any, mu_resp_any);

        let shared_n = |mark_unread: SessionRates| StrategyRates {
            flag: flag_n,
            mark_unread,
            move_to_folder: SessionRates { read: 0.060, revisit: 0.030 },
            delete: SessionRates { read: 0.121, revisit: 0.054 },
            flag_complete: SessionRates { read: 0.003, revisit: 0.003 },
            link_clicked: SessionRates { read: 0.034, revisit: 0.008 },
            opened_attachment: SessionRates { read: 0.087, revisit: 0.027 },
        };
        let responder_strategy = shared_n(SessionRates { read: mu_resp_any, revisit: 0.0 });
        let silent_strategy = shared_n(SessionRates {
            read: 0.008,
            revisit: revisit_for(mu_silent_any, 0.008),
        });

        SynthConfig {
            num_users: 2000,
            days: 14,
            seed: 7,
            // 2018-05-06 00:00 UTC.
            start_ts: 1_525_564_800,
            arrivals_per_user_day: 8.0,
            base_defer_prob: b,
            workload_slope: 0.0,
            body_length_slope: 0.0,
            meeting_slope: 0.0,
            completion_prob: c,
            nondeferred_response_prob: q,
            style_mix: StyleMix {
                piler: 0.3,
                zero_inbox: 0.2,
                zero_unread: 0.5,
            },
            mean_intersession_gap_secs: 14_400.0,
            meetings_per_day: 3.0,
            body_ln_mean: 4.0,
            body_ln_sd: 0.8,
            deferred: ClassProfile {
                meta: deferred_meta,
                strategy: deferred_strategy,
            },
            responder: ClassProfile {
                meta: responder_meta,
                strategy: responder_strategy,
            },
            silent: ClassProfile {
                meta: silent_meta,
                strategy: silent_strategy,
            },
        }
    }

    /// A configuration with a strongly planted signal: deferral probability
    /// is driven by body length and by the unhandled count, and explicit
    /// signals are common enough to make the signal cohort large. Metadata
    /// and strategy rates are identical across classes so that body length
    /// and workload are the only class signal.
    pub fn planted_signal() -> SynthConfig {
        let mut cfg = SynthConfig::default_calibrated();
        cfg.num_users = 500;
        cfg.days = 8;
        cfg.arrivals_per_user_day = 12.0;
        cfg.base_defer_prob = 0.10;
        cfg.body_length_slope = 2.4;
        cfg.workload_slope = 0.25;
        cfg.body_ln_sd = 1.3;
        cfg.completion_prob = 0.92;
        // Pilers accumulate backlog, widening the unhandled-count spread.
        cfg.style_mix = StyleMix {
            piler: 0.6,
            zero_inbox: 0.1,
            zero_unread: 0.3,
        };
        let meta = MetaParams {
            mean_recipients: 4.5,
            action_request_rate: 0.05,
            reply_request_rate: 0.12,
            human_rate: 0.8,
            same_org_rate: 0.6,
            known_rate: 0.7,
            important_rate: 0.42,
            bulk_rate: 0.2,
            in_thread_rate: 0.45,
        };
        let strategy = StrategyRates {
            flag: SessionRates { read: 0.25, revisit: 0.01 },
            mark_unread: SessionRates { read: 0.25, revisit: 0.01 },
            move_to_folder: SessionRates { read: 0.04, revisit: 0.05 },
            delete: SessionRates { read: 0.05, revisit: 0.05 },
            flag_complete: SessionRates { read: 0.002, revisit: 0.005 },
            link_clicked: SessionRates { read: 0.025, revisit: 0.01 },
            opened_attachment: SessionRates { read: 0.11, revisit: 0.06 },
        };
        for profile in [&mut cfg.deferred, &mut cfg.responder, &mut cfg.silent] {
            profile.meta = meta;
            profile.strategy = strategy;
        }
        cfg
    }

    /// Serializes to the flat `key = value` format, keys in sorted order.
    pub fn to_kv_string(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut pairs = Vec::new();
        flatten("", &value, &mut pairs);
        pairs.sort();
        let mut out = String::from("# synthetic corpus configuration\n");
        for (k, v) in pairs {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Parses the flat format. Unlisted keys keep their calibrated-default
    /// values; unknown keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<SynthConfig> {
        let mut value =
            serde_json::to_value(SynthConfig::default_calibrated()).expect("config serializes");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| Error::Parse {
                file: "config".to_string(),
                line: lineno + 1,
                message: "expected `key = value`".to_string(),
            })?;
            let key = key.trim();
            let parsed: serde_json::Value =
                serde_json::from_str(val.trim()).map_err(|e| Error::Parse {
                    file: "config".to_string(),
                    line: lineno + 1,
                    message: format!("{key}: {e}"),
                })?;
            set_path(&mut value, key, parsed).map_err(|msg| Error::Parse {
                file: "config".to_string(),
                line: lineno + 1,
                message: msg,
            })?;
        }
        let config: SynthConfig = serde_json::from_value(value)?;
        config.validate()?;
        Ok(config)
    }
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn set_path(
    root: &mut serde_json::Value,
    path: &str,
    new: serde_json::Value,
) -> std::result::Result<(), String> {
    let mut cursor = root;
    for part in path.split('.') {
        let obj = cursor
            .as_object_mut()
            .ok_or_else(|| format!("{path}: not a nested field"))?;
        cursor = obj
            .get_mut(part)
            .ok_or_else(|| format!("unknown config key {path:?}"))?;
    }
    if cursor.is_object() {
        return Err(format!("{path}: refers to a group, not a value"));
    }
    *cursor = new;
    Ok(())
}
