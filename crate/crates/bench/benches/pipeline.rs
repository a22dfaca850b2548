use chanspec::channel::{natural_representation, spectral_decompose};
use chanspec::specest::matrix_pencil;
use chanspec::trajectory::{exact_probabilities, sample_trajectories};
use chanspec::PencilConfig;
use chanspec_bench::two_spin;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn channel(c: &mut Criterion) {
    let (k, _) = two_spin().unwrap();
    c.bench_function("natural_representation/d4", |b| b.iter(|| natural_representation(black_box(&k))));
    let s = natural_representation(&k);
    c.bench_function("spectral_decompose/16x16", |b| b.iter(|| spectral_decompose(black_box(&s)).unwrap()));
}

fn signal(c: &mut Criterion) {
    let (k, rho) = two_spin().unwrap();
    let p = exact_probabilities(&k, &rho, 1, 150).unwrap().values;
    let cfg = PencilConfig::default();
    c.bench_function("matrix_pencil/N150", |b| b.iter(|| matrix_pencil(black_box(&p), &cfg).unwrap()));
    let mut g = c.benchmark_group("sample_trajectories");
    g.sample_size(10);
    g.bench_function("S1e4_N50", |b| b.iter(|| sample_trajectories(&k, &rho, 50, 10_000, 1, Some(1)).unwrap()));
    g.finish();
}

criterion_group!(benches, channel, signal);
criterion_main!(benches);
