//! The three deferral-prediction experiments.
//!
//! - Experiment 1: among messages carrying an explicit deferral signal
//!   (Flag or MarkAsUnread in the first-read session) and without a strong
//!   action in the first-read session, predict whether a strong action
//!   arrives in a later session. The baseline predicts positive for
//!   everything.
//! - Experiment 2: among messages with a strong action at any time *and* an
//!   explicit signal, predict whether every strong action falls in a later
//!   session. Strong-action counts are excluded from the features. The
//!   baseline again predicts all positive, so its recall is exactly 1.
//! - Experiment 3: like Experiment 2 but without the signal restriction;
//!   the baseline predicts positive iff the message carries the explicit
//!   signal.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::{build_dataset, FeatureExtractor, UserProfile};
use crate::gbdt::{cross_validate, train, GbdtParams, Model};
use crate::label::LabelSet;
use crate::session::Sessions;
use crate::util::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 3] = [ExperimentId::Exp1, ExperimentId::Exp2, ExperimentId::Exp3];

    pub fn number(self) -> u8 {
        match self {
            ExperimentId::Exp1 => 1,
            ExperimentId::Exp2 => 2,
            ExperimentId::Exp3 => 3,
        }
    }

    /// Strong-action counts directly leak the label in experiments 2 and 3.
    pub fn excluded_features(self) -> &'static [&'static str] {
        match self {
            ExperimentId::Exp1 => &[],
            _ => &["NumResponse"],
        }
    }
}

/// How one experiment is run: cohort and label rules are fixed by the id;
/// everything else is configuration.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub split_seed: u64,
    pub test_fraction: f64,
    pub positive_weight: f64,
    pub cv_folds: usize,
    pub grid: Vec<GbdtParams>,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, split_seed: u64, grid: Vec<GbdtParams>) -> Self {
        ExperimentSpec {
            id,
            split_seed,
            test_fraction: 0.2,
            positive_weight: 10.0,
            cv_folds: 5,
            grid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall, and F1 at fixed predictions. Conventions: a ratio with
/// a zero denominator is 0, and F1 is 0 when precision + recall is 0.
pub fn metrics(predictions: &[bool], labels: &[bool]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
    })
}

/// Session placement of strong actions per message.
#[derive(Debug, Clone, Copy, Default)]
struct StrongPlacement {
    any: bool,
    in_read_session: bool,
    before_read_session: bool,
    after_read_session: bool,
}

fn strong_placements<'c>(
    labels: &LabelSet,
    sessions: &Sessions,
    corpus: &'c Corpus,
) -> BTreeMap<&'c str, StrongPlacement> {
    let mut out: BTreeMap<&str, StrongPlacement> = BTreeMap::new();
    for a in &corpus.actions {
        if !a.action.is_strong() {
            continue;
        }
        let entry = out.entry(a.message_id.as_str()).or_default();
        entry.any = true;
        let read_ordinal = labels.get(&a.message_id).and_then(|l| l.first_read_session);
        let Some(read_ordinal) = read_ordinal else {
            continue;
        };
        match sessions.ordinal_at(&a.user_id, a.timestamp) {
            Some(o) if o == read_ordinal => entry.in_read_session = true,
            Some(o) if o > read_ordinal => entry.after_read_session = true,
            Some(_) => entry.before_read_session = true,
            None => {}
        }
    }
    out
}

/// Builds the cohort (message ids in deterministic order) and binary labels
/// for one experiment.
pub fn build_cohort(
    id: ExperimentId,
    labels: &LabelSet,
    sessions: &Sessions,
    corpus: &Corpus,
) -> Result<(Vec<String>, Vec<bool>)> {
    let placements = strong_placements(labels, sessions, corpus);
    let mut cohort = Vec::new();
    let mut positive = Vec::new();
    for l in labels.iter() {
        if l.first_read_session.is_none() {
            continue;
        }
        let p = placements
            .get(l.message_id.as_str())
            .copied()
            .unwrap_or_default();
        let only_later = p.any && p.after_read_session && !p.in_read_session && !p.before_read_session;
        let (include, is_positive) = match id {
            ExperimentId::Exp1 => (
                l.explicit_signal && !p.in_read_session,
                p.after_read_session,
            ),
            ExperimentId::Exp2 => (l.explicit_signal && p.any, only_later),
            ExperimentId::Exp3 => (p.any, only_later),
        };
        if include {
            cohort.push(l.message_id.clone());
            positive.push(is_positive);
        }
    }
    if cohort.is_empty() {
        return Err(Error::EmptyCohort(format!(
            "experiment {} selects no messages",
            id.number()
        )));
    }
    Ok((cohort, positive))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub experiment: u8,
    pub cohort_size: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub positive_rate: f64,
    pub model: Metrics,
    pub baseline: Metrics,
    pub chosen_params: GbdtParams,
    pub cv_mean_f1: f64,
    pub top_features: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiments: Vec<ExperimentOutcome>,
}

impl EvalReport {
    /// Evaluation table plus per-experiment detail blocks.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<12}", ""));
        for e in &self.experiments {
            out.push_str(&format!("{:<24}", format!("Experiment {}", e.experiment)));
        }
        out.push('\n');
        out.push_str(&format!("{:<12}", ""));
        for _ in &self.experiments {
            out.push_str(&format!("{:>6}  {:>6}  {:>6}  ", "P", "R", "F1"));
        }
        out.push('\n');
        for (name, pick_model) in [("Our Model", true), ("Baseline", false)] {
            out.push_str(&format!("{name:<12}"));
            for e in &self.experiments {
                let m = if pick_model { &e.model } else { &e.baseline };
                out.push_str(&format!(
                    "{:>6.2}  {:>6.2}  {:>6.2}  ",
                    m.precision, m.recall, m.f1
                ));
            }
            out.push('\n');
        }
        for e in &self.experiments {
            out.push_str(&format!(
                "\nExperiment {}: cohort {} (train {}, test {}), positive rate {:.3}\n",
                e.experiment, e.cohort_size, e.train_size, e.test_size, e.positive_rate
            ));
            out.push_str(&format!(
                "  params: trees {}, lr {}, depth {}, min leaf {}, cv F1 {:.3}\n",
                e.chosen_params.num_trees,
                e.chosen_params.learning_rate,
                e.chosen_params.max_depth,
                e.chosen_params.min_samples_leaf,
                e.cv_mean_f1
            ));
            out.push_str("  top features:\n");
            for (name, imp) in &e.top_features {
                out.push_str(&format!("    {name:<20} {imp:.4}\n"));
            }
        }
        out
    }
}

/// Deterministic shuffled train/test split of row indices.
fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::Config(format!(
            "test fraction must be in [0, 1], got {test_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5911));
    idx.shuffle(&mut rng);
    let n_test = (n as f64 * test_fraction).floor() as usize;
    let test = idx[..n_test].to_vec();
    let train = idx[n_test..].to_vec();
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    Ok((train, test))
}

/// Runs one experiment end to end: cohort, split, CV, fit, and evaluation of
/// both the model and the baseline on the held-out test set.
pub fn run_experiment(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    sessions: &Sessions,
    labels: &LabelSet,
    profiles: &BTreeMap<String, UserProfile>,
) -> Result<(ExperimentOutcome, Model)> {
    let (cohort, positive) = build_cohort(spec.id, labels, sessions, corpus)?;
    let extractor = FeatureExtractor::new(corpus, sessions, labels, profiles);
    let full = build_dataset(&extractor, &cohort, &positive, spec.positive_weight)?
        .drop_columns(spec.id.excluded_features());

    let (train_idx, test_idx) =
        train_test_split(full.n_rows(), spec.test_fraction, spec.split_seed)?;
    let train_set = full.subset(&train_idx);
    let test_set = full.subset(&test_idx);

    let cv = cross_validate(&train_set, &spec.grid, spec.cv_folds, spec.split_seed)?;
    let model = train(&train_set, &cv.best)?;

    let model_preds: Vec<bool> = (0..test_set.n_rows())
        .map(|i| model.predict(test_set.row(i)).map(|p| p >= 0.5))
        .collect::<Result<_>>()?;
    let truth: Vec<bool> = test_set.labels.iter().map(|&y| y == 1).collect();
    let baseline_preds: Vec<bool> = match spec.id {
        ExperimentId::Exp1 | ExperimentId::Exp2 => vec![true; test_set.n_rows()],
        ExperimentId::Exp3 => test_set
            .message_ids
            .iter()
            .map(|id| labels.get(id).map_or(false, |l| l.explicit_signal))
            .collect(),
    };

    let positive_count = positive.iter().filter(|&&p| p).count();
    let outcome = ExperimentOutcome {
        experiment: spec.id.number(),
        cohort_size: full.n_rows(),
        train_size: train_set.n_rows(),
        test_size: test_set.n_rows(),
        positive_rate: positive_count as f64 / full.n_rows() as f64,
        model: metrics(&model_preds, &truth)?,
        baseline: metrics(&baseline_preds, &truth)?,
        chosen_params: cv.best,
        cv_mean_f1: cv.mean_f1,
        top_features: model.importance_ranking().into_iter().take(10).collect(),
    };
    Ok((outcome, model))
}

/// Runs all three experiments with the same configuration.
pub fn run_all(
    corpus: &Corpus,
    sessions: &Sessions,
    labels: &LabelSet,
    profiles: &BTreeMap<String, UserProfile>,
    split_seed: u64,
    positive_weight: f64,
    grid: &[GbdtParams],
) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for id in ExperimentId::ALL {
        let mut spec = ExperimentSpec::new(id, split_seed, grid.to_vec());
        spec.positive_weight = positive_weight;
        let (outcome, _) = run_experiment(&spec, corpus, sessions, labels, profiles)?;
        report.experiments.push(outcome);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ActionRecord, ActionType, MessageMeta};
    use crate::label::{label_corpus, SignalWindow};
    use crate::session::sessionize;

    #[test]
    fn metrics_on_perfect_mixed_predictions() {
        let preds = [true, false, true, false];
        let labels = [true, false, true, false];
        let m = metrics(&preds, &labels).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn all_positive_predictor_on_14_percent_base_rate() {
        let mut labels = vec![true; 14];
        labels.extend(vec![false; 86]);
        let preds = vec![true; 100];
        let m = metrics(&preds, &labels).unwrap();
        assert!((m.precision - 0.14).abs() < 1e-12);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 0.245).abs() < 1e-3, "f1 {}", m.f1);
    }

    #[test]
    fn no_predicted_positives_is_all_zero() {
        let m = metrics(&[false, false], &[true, false]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn metrics_rejects_length_mismatch() {
        assert!(matches!(
            metrics(&[true], &[true, false]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn f1_is_harmonic_mean_of_p_and_r() {
        let preds = [true, true, false, true, false, false];
        let labels = [true, false, true, true, false, true];
        let m = metrics(&preds, &labels).unwrap();
        let expected = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        assert!((m.f1 - expected).abs() < 1e-9);
    }

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

    fn mk(user: &str, msg: &str, action: ActionType, ts: i64) -> ActionRecord {
        ActionRecord {
            user_id: user.to_string(),
            message_id: msg.to_string(),
            action,
            timestamp: ts,
        }
    }

    /// Six messages covering cohort rules: a flagged deferral, a flagged
    /// immediate reply, a flagged never-returned message, an unflagged
    /// deferral, an unflagged immediate reply, and a read-only message.
    fn cohort_corpus() -> Corpus {
        let mut messages = std::collections::BTreeMap::new();
        for id in ["m1", "m2", "m3", "m4", "m5", "m6"] {
            messages.insert(id.to_string(), meta(id, "u1", 0));
        }
        let actions = vec![
            // m1: flag at read, reply later.
            mk("u1", "m1", ActionType::Read, 100),
            mk("u1", "m1", ActionType::Flag, 110),
            mk("u1", "m1", ActionType::Reply, 20_000),
            // m2: flag at read, reply in the same session.
            mk("u1", "m2", ActionType::Read, 130),
            mk("u1", "m2", ActionType::Flag, 140),
            mk("u1", "m2", ActionType::Reply, 150),
            // m3: mark-unread at read, never returned to.
            mk("u1", "m3", ActionType::Read, 160),
            mk("u1", "m3", ActionType::MarkAsUnread, 170),
            // m4: plain deferral without signal.
            mk("u1", "m4", ActionType::Read, 180),
            mk("u1", "m4", ActionType::Forward, 40_000),
            // m5: plain immediate reply.
            mk("u1", "m5", ActionType::Read, 190),
            mk("u1", "m5", ActionType::Reply, 200),
            // m6: read only.
            mk("u1", "m6", ActionType::Read, 210),
        ];
        Corpus::new(actions, messages, Default::default()).unwrap()
    }

    #[test]
    fn cohort_rules_match_definitions() {
        let corpus = cohort_corpus();
        let sessions = sessionize(&corpus, 600).unwrap();
        let labels = label_corpus(&corpus, &sessions, SignalWindow::ReadSession).unwrap();

        let (c1, p1) = build_cohort(ExperimentId::Exp1, &labels, &sessions, &corpus).unwrap();
        // m2 is excluded (strong action in read session); m1 and m3 remain.
        assert_eq!(c1, vec!["m1".to_string(), "m3".to_string()]);
        assert_eq!(p1, vec![true, false]);

        let (c2, p2) = build_cohort(ExperimentId::Exp2, &labels, &sessions, &corpus).unwrap();
        // Strong action AND signal: m1 (deferred) and m2 (immediate).
        assert_eq!(c2, vec!["m1".to_string(), "m2".to_string()]);
        assert_eq!(p2, vec![true, false]);

        let (c3, p3) = build_cohort(ExperimentId::Exp3, &labels, &sessions, &corpus).unwrap();
        // Any strong action: m1, m2, m4, m5.
        assert_eq!(
            c3,
            vec![
                "m1".to_string(),
                "m2".to_string(),
                "m4".to_string(),
                "m5".to_string()
            ]
        );
        assert_eq!(p3, vec![true, false, true, false]);

        // Exp2 cohort is contained in Exp3's.
        assert!(c2.iter().all(|m| c3.contains(m)));
    }

    #[test]
    fn split_is_deterministic_and_validates_fractions() {
        let (a_train, a_test) = train_test_split(100, 0.2, 7).unwrap();
        let (b_train, b_test) = train_test_split(100, 0.2, 7).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        assert_eq!(a_test.len(), 20);
        let (c_train, _) = train_test_split(100, 0.2, 8).unwrap();
        assert_ne!(a_train, c_train);

        assert!(matches!(
            train_test_split(10, 1.0, 7),
            Err(Error::EmptyTrainingSet)
        ));
        assert!(matches!(
            train_test_split(10, 0.0, 7),
            Err(Error::EmptyTestSet)
        ));
    }

    #[test]
    fn exp2_baseline_recall_is_one_by_construction() {
        // Every Exp2 cohort member is predicted positive by the baseline;
        // positives are a subset, so recall is exactly 1.
        let truth = vec![true, false, true, true, false];
        let baseline = vec![true; truth.len()];
        let m = metrics(&baseline, &truth).unwrap();
        assert_eq!(m.recall, 1.0);
    }
}
