//! Benchmarks for the hot pipeline stages: generation, sessionization,
//! labeling, workload statistics, bootstrap, and boosted-tree training.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use std::hint::black_box;

use deferral_core::features::{
    build_dataset, infer_profiles, FeatureExtractor, StyleThresholds,
};
use deferral_core::gbdt::{train, GbdtParams};
use deferral_core::label::{label_corpus, DeferralClass, SignalWindow};
use deferral_core::session::sessionize;
use deferral_core::stats::{bootstrap_mean_ci, workload_curve, CiConfig, WorkloadMetric};
use deferral_core::synth::{generate, SynthConfig};

fn bench_config() -> SynthConfig {
    let mut cfg = SynthConfig::default_calibrated();
    cfg.num_users = 300;
    cfg.days = 10;
    cfg
}

fn bench_generate(c: &mut Criterion) {
    let cfg = bench_config();
    let (corpus, _) = generate(&cfg).unwrap();
    let mut group = c.benchmark_group("generate");
    group.throughput(Throughput::Elements(corpus.messages.len() as u64));
    group.sample_size(10);
    group.bench_function("synthetic_corpus", |b| {
        b.iter(|| generate(black_box(&cfg)).unwrap())
    });
    group.finish();
}

fn bench_sessionize_and_label(c: &mut Criterion) {
    let (corpus, _) = generate(&bench_config()).unwrap();
    let mut group = c.benchmark_group("sessionize");
    group.throughput(Throughput::Elements(corpus.actions.len() as u64));
    group.bench_function("inactivity_gap", |b| {
        b.iter(|| sessionize(black_box(&corpus), 600).unwrap())
    });
    group.finish();

    let sessions = sessionize(&corpus, 600).unwrap();
    let mut group = c.benchmark_group("label");
    group.throughput(Throughput::Elements(corpus.messages.len() as u64));
    group.bench_function("deferral_labels", |b| {
        b.iter(|| label_corpus(black_box(&corpus), &sessions, SignalWindow::ReadSession).unwrap())
    });
    group.finish();
}

fn bench_workload_curve(c: &mut Criterion) {
    let (corpus, _) = generate(&bench_config()).unwrap();
    let sessions = sessionize(&corpus, 600).unwrap();
    let labels = label_corpus(&corpus, &sessions, SignalWindow::ReadSession).unwrap();
    let ci = CiConfig {
        resamples: 200,
        ..CiConfig::default()
    };
    c.bench_function("workload_curve", |b| {
        b.iter(|| {
            workload_curve(
                black_box(&labels),
                &sessions,
                &corpus,
                WorkloadMetric::UnhandledMessages,
                &[0, 1, 2, 4, 8, 16, 32],
                &ci,
            )
        })
    });
}

fn bench_bootstrap(c: &mut Criterion) {
    let samples: Vec<f64> = (0..50_000).map(|i| f64::from(i % 9)).collect();
    c.bench_function("bootstrap_mean_50k", |b| {
        b.iter(|| bootstrap_mean_ci(black_box(&samples), 1000, 0.05, 7))
    });
}

fn bench_train(c: &mut Criterion) {
    let (corpus, _) = generate(&bench_config()).unwrap();
    let sessions = sessionize(&corpus, 600).unwrap();
    let labels = label_corpus(&corpus, &sessions, SignalWindow::ReadSession).unwrap();
    let profiles = infer_profiles(&corpus, &StyleThresholds::default());
    let extractor = FeatureExtractor::new(&corpus, &sessions, &labels, &profiles);
    let mut cohort = Vec::new();
    let mut positive = Vec::new();
    for l in labels.iter() {
        if l.first_read_session.is_some() {
            cohort.push(l.message_id.clone());
            positive.push(l.label == DeferralClass::Deferred);
        }
    }
    let dataset = build_dataset(&extractor, &cohort, &positive, 10.0).unwrap();
    let params = GbdtParams {
        num_trees: 50,
        max_depth: 6,
        ..GbdtParams::default()
    };
    let mut group = c.benchmark_group("gbdt");
    group.sample_size(10);
    group.throughput(Throughput::Elements(dataset.n_rows() as u64));
    group.bench_function("train_50_trees", |b| {
        b.iter_batched(
            || dataset.clone(),
            |ds| train(black_box(&ds), &params).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_generate,
    bench_sessionize_and_label,
    bench_workload_curve,
    bench_bootstrap,
    bench_train
);
criterion_main!(benches);
