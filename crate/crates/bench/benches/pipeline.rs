//! Micro-benchmarks for the offline and online stages.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use live_core::embedding::{discrete_cost, EmbeddingSet};
use live_core::generate::{generate_query, generate_synthetic, LabelDistribution};
use live_core::index::{build_index, IndexConfig};
use live_core::matcher::{match_query, oracle_match};
use live_core::train::{train, TrainConfig};
use live_core::Graph;

fn data_graph(n: usize) -> Graph {
    generate_synthetic(n, 4, 0.25, &LabelDistribution::uniform(15), 7).unwrap()
}

fn offline(c: &mut Criterion) {
    let g = data_graph(20_000);
    let table = train(&g, &TrainConfig { epochs: 50, ..TrainConfig::with_seed(7) }).unwrap();
    c.bench_function("train_50_epochs_20k", |b| {
        b.iter(|| train(black_box(&g), &TrainConfig { epochs: 50, ..TrainConfig::with_seed(7) }).unwrap())
    });
    c.bench_function("build_index_20k", |b| {
        b.iter(|| build_index(black_box(&g), &table, IndexConfig::default()).unwrap())
    });
    let set = EmbeddingSet::compute(&g, &table).unwrap();
    c.bench_function("discrete_cost_20k", |b| b.iter(|| discrete_cost(black_box(set.mves())).unwrap()));
}

fn online(c: &mut Criterion) {
    let g = data_graph(20_000);
    let table = train(&g, &TrainConfig::with_seed(7)).unwrap();
    let index = build_index(&g, &table, IndexConfig::default()).unwrap();
    let queries: Vec<Graph> = (0..16).map(|i| generate_query(&g, 8, 3.0, i).unwrap()).collect();
    let mut next = 0;
    c.bench_function("match_query_8v_20k", |b| {
        b.iter_batched(
            || {
                next = (next + 1) % queries.len();
                &queries[next]
            },
            |q| match_query(&index, &g, &table, q).unwrap(),
            BatchSize::SmallInput,
        )
    });
    let small = data_graph(2_000);
    let q = generate_query(&small, 5, 2.0, 1).unwrap();
    c.bench_function("oracle_5v_2k", |b| b.iter(|| oracle_match(black_box(&small), &q)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = offline, online
}
criterion_main!(benches);
