use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stylefb_core::frontend::parse_source;
use stylefb_core::rules::{analyze_constants, analyze_decomposition, common_runs, RuleConfig};
use stylefb_core::synth::random_program;

fn corpus(n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n).map(|_| random_program(&mut rng).render()).collect()
}

fn parse(c: &mut Criterion) {
    let programs = corpus(64);
    c.bench_function("parse/64 programs", |b| {
        b.iter(|| {
            for p in &programs {
                black_box(parse_source(p).unwrap());
            }
        })
    });
}

fn rules(c: &mut Criterion) {
    let facts: Vec<_> = corpus(64).iter().map(|p| parse_source(p).unwrap()).collect();
    let cfg = RuleConfig::default();
    c.bench_function("rules/64 programs", |b| {
        b.iter(|| {
            for f in &facts {
                black_box(analyze_constants(f, &cfg));
                black_box(analyze_decomposition(f, &cfg));
            }
        })
    });
}

fn duplicates(c: &mut Criterion) {
    let mut group = c.benchmark_group("common_runs");
    for n in [50usize, 200, 800] {
        // Period-7 sequence: many long diagonals.
        let seq: Vec<u32> = (0..n as u32).map(|i| i % 7).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &seq, |b, seq| {
            b.iter(|| black_box(common_runs(seq, seq, true, 5)))
        });
    }
    group.finish();
}

criterion_group!(benches, parse, rules, duplicates);
criterion_main!(benches);
