use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emolink::classifier::{EmotionClassifier, EmotionLexicon, LexiconClassifier};
use emolink::emotion::EmotionVector;
use emolink::exec::Execution;
use emolink::ingest::{RatingEvent, ScopedId};
use emolink::pac::{aii_scan_with, CandidatePool};
use emolink::recommend::{ibcf_recommend_with, RatingMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn vector(rng: &mut ChaCha8Rng) -> EmotionVector {
    EmotionVector::new(std::array::from_fn(|_| rng.random_range(0.001..1.0))).unwrap()
}

fn scan(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("aii_scan");
    for size in [10_000u64, 200_000] {
        let pool = CandidatePool::from_entries("p", (0..size).map(|i| (ScopedId::new("p", i), vector(&mut rng)))).unwrap();
        let probe = vector(&mut rng);
        let id = ScopedId::new("q", "1");
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, size), &pool, |b, pool| {
                b.iter(|| aii_scan_with(&id, black_box(&probe), pool, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn ibcf(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let events: Vec<RatingEvent> = (0..40_000)
        .map(|_| RatingEvent {
            user: ScopedId::new("m", rng.random_range(0..2_000u64)),
            item: ScopedId::new("m", rng.random_range(0..1_500u64)),
            score: rng.random_range(1..=10) as f64 / 2.0,
            timestamp: 0,
            review_text: None,
            summary: None,
        })
        .collect();
    let matrix = RatingMatrix::from_events(&events);
    let user = matrix.users()[0].clone();
    let mut group = c.benchmark_group("ibcf");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| ibcf_recommend_with(black_box(&user), &matrix, 20, exec).unwrap()));
    }
    group.finish();
}

fn classify(c: &mut Criterion) {
    let words = ["joy", "grief", "rage", "twist", "plain", "filth", "dread", "the", "of", "night"];
    let lexicon = EmotionLexicon::new(
        [("happiness", "joy"), ("sadness", "grief"), ("anger", "rage"), ("surprise", "twist"), ("neutral", "plain"), ("disgust", "filth"), ("hate", "dread")]
            .map(|(l, w)| (l.parse().unwrap(), w)),
        1.0,
    )
    .unwrap();
    let classifier = LexiconClassifier::new(lexicon);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let texts: Vec<String> = (0..5_000)
        .map(|_| (0..120).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(" "))
        .collect();
    let mut group = c.benchmark_group("classify_batch");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| exec.map(&texts, |t| classifier.classify(t))));
    }
    group.finish();
}

criterion_group!(benches, scan, ibcf, classify);
criterion_main!(benches);
