//! Benchmarks of the paths that dominate the acceptance runtimes: ball
//! extraction with canonical coding, neighborhood histograms, the
//! depth-one entropy, tree sampling and one diffusion trajectory.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use graphldp::ball::ball;
use graphldp::canon::canonical_code;
use graphldp::diffusion::{simulate, Network, Potentials};
use graphldp::empirical::empirical_distribution;
use graphldp::ensembles::{sample_er, sample_er_marked};
use graphldp::entropy::{seed_pstar, truncated_entropy_jh};
use graphldp::mark::{EdgePairLaw, MarkLaw, VertexLaw};
use graphldp::rng;
use graphldp::ugwt::sample_pstar_tree;

fn two_mark_law() -> MarkLaw {
    MarkLaw {
        nu: VertexLaw::Finite(vec![0.5, 0.5]),
        chi: EdgePairLaw::Finite(vec![vec![0.25, 0.25], vec![0.25, 0.25]]),
    }
}

fn bench_balls_and_codes(c: &mut Criterion) {
    let mut r = rng::stream(1, "bench-graph");
    let g = sample_er_marked(2000, 2.0, &two_mark_law(), &mut r).unwrap();
    c.bench_function("ball_depth2_with_code", |b| {
        let mut v = 0u32;
        b.iter(|| {
            v = (v + 1) % 2000;
            let ball = ball(&g, v, 2);
            black_box(canonical_code(&ball).unwrap())
        })
    });
    c.bench_function("empirical_distribution_n2000_h2", |b| {
        b.iter(|| black_box(empirical_distribution(&g, 2).unwrap()))
    });
}

fn bench_entropy(c: &mut Criterion) {
    let nu = vec![0.3, 0.7];
    let chi = vec![vec![0.2, 0.3], vec![0.4, 0.1]];
    c.bench_function("depth_one_entropy_marked", |b| {
        b.iter(|| {
            let seed = seed_pstar(nu.clone(), chi.clone(), 2.0).unwrap();
            black_box(truncated_entropy_jh(&seed, 1).unwrap().value)
        })
    });
}

fn bench_tree_sampling(c: &mut Criterion) {
    let nu = [0.5, 0.5];
    let chi = vec![vec![1.0]];
    c.bench_function("limit_tree_depth2", |b| {
        let mut r = rng::stream(2, "bench-tree");
        b.iter(|| black_box(sample_pstar_tree(&nu, &chi, 2.0, 2, &mut r).unwrap()))
    });
}

fn bench_diffusion(c: &mut Criterion) {
    let mut r = rng::stream(3, "bench-net");
    let skel = sample_er(50, 2.0, &mut r).unwrap();
    let omega = vec![0.1; 50];
    let x0 = vec![0.0; 50];
    let net = Network::with_unit_strengths(&skel, omega, x0).unwrap();
    let pot = Potentials::kuramoto(1.0).unwrap();
    c.bench_function("simulate_n50_t05_dt1e3", |b| {
        b.iter_batched(
            || rng::stream(4, "bench-path"),
            |mut r| black_box(simulate(&net, &pot, 1.0, 0.5, 1e-3, &mut r).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_balls_and_codes,
    bench_entropy,
    bench_tree_sampling,
    bench_diffusion
);
criterion_main!(benches);
