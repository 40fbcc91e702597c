use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use merw_core::{
    canopy::simulate_canopy, generate, merw, perturb_loops, walk_counts_truncated, BallTruncation,
    Family, LoopSpec,
};

fn merw_random_regular(c: &mut Criterion) {
    let mut group = c.benchmark_group("merw_random_regular");
    for n in [500usize, 2000] {
        let g = generate(&Family::RandomRegular { n, d: 4, seed: 1 }).unwrap();
        let h = perturb_loops(&g, &LoopSpec::single(0, 4.0).unwrap()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| {
            b.iter(|| merw(black_box(h), 1e-12).unwrap())
        });
    }
    group.finish();
}

fn tree_shell_walk_counts(c: &mut Criterion) {
    let ball = BallTruncation::tree(4, 300)
        .unwrap()
        .with_center_loop(4.0)
        .unwrap();
    c.bench_function("tree_shell_walk_counts_300", |b| {
        b.iter(|| walk_counts_truncated(black_box(&ball), 300))
    });
}

fn canopy_trajectory(c: &mut Criterion) {
    c.bench_function("canopy_trajectory_1e5", |b| {
        b.iter(|| simulate_canopy(3, black_box(100_000), 7).unwrap())
    });
}

criterion_group!(
    benches,
    merw_random_regular,
    tree_shell_walk_counts,
    canopy_trajectory
);
criterion_main!(benches);
