//! Corpus-scale throughput: the crate's batch entry points (rayon under the
//! default `parallel` feature) against explicit sequential baselines.
//!
//! Run `cargo bench` for the parallel build and
//! `cargo bench --no-default-features` to measure the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use rumorcl::augment::{AugmentConfig, AugmentPlanner};
use rumorcl::centrality::{compute_centrality, compute_corpus, CentralityKind, CentralityMeasure};
use rumorcl::stats::{claim_stats, corpus_stats};
use rumorcl::synth::random_rpt;
use rumorcl::tree::PropagationTree;

fn corpus(trees: usize, max_nodes: usize) -> Vec<PropagationTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    (0..trees).map(|_| random_rpt(&mut rng, max_nodes, 16)).collect()
}

fn bench_corpus_stats(c: &mut Criterion) {
    let trees = corpus(2048, 50);
    let mut group = c.benchmark_group("corpus_stats");
    group.bench_function("batch", |b| b.iter(|| corpus_stats(black_box(&trees)).unwrap()));
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let per_claim: Vec<_> = trees.iter().map(claim_stats).collect();
            black_box(per_claim)
        })
    });
    group.finish();
}

fn bench_centrality(c: &mut Criterion) {
    let trees = corpus(512, 50);
    let mut group = c.benchmark_group("centrality_corpus");
    for kind in [CentralityKind::Degree, CentralityKind::PageRank, CentralityKind::Betweenness] {
        let measure = CentralityMeasure::new(kind);
        group.bench_with_input(BenchmarkId::new("batch", kind), &measure, |b, measure| {
            b.iter(|| compute_corpus(black_box(&trees), measure).unwrap())
        });
        group.bench_with_input(
            BenchmarkId::new("sequential", kind),
            &measure,
            |b, measure| {
                b.iter(|| {
                    let scores: Vec<_> = trees
                        .iter()
                        .map(|t| compute_centrality(t, measure).unwrap())
                        .collect();
                    black_box(scores)
                })
            },
        );
    }
    group.finish();
}

fn bench_view_sampling(c: &mut Criterion) {
    let trees = corpus(512, 50);
    let config = AugmentConfig::default();
    let planners: Vec<AugmentPlanner> = trees
        .iter()
        .map(|t| AugmentPlanner::new(t, &config).unwrap())
        .collect();
    let mut group = c.benchmark_group("view_sampling");
    group.bench_function("batch", |b| {
        b.iter(|| {
            let views = rumorcl::par::map_indexed(&trees, |i, tree| {
                planners[i].views(tree, i as u64)
            });
            black_box(views)
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let views: Vec<_> = trees
                .iter()
                .enumerate()
                .map(|(i, tree)| planners[i].views(tree, i as u64))
                .collect();
            black_box(views)
        })
    });
    group.finish();
}

criterion_group!(benches, bench_corpus_stats, bench_centrality, bench_view_sampling);
criterion_main!(benches);
