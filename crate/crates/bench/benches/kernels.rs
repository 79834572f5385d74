use affinekit::{
    char_fn, delta_shift, expectation_via_density, expectation_via_inversion, mc_expectation,
    sample_exact, transition_density, transition_rep, ExpectationBackend, MCConfig,
    QuadratureConfig, StreamKey, TestFunction,
};
use affinekit_bench::reference_params;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_char_fn(c: &mut Criterion) {
    let p = reference_params();
    c.bench_function("char_fn", |b| {
        b.iter(|| char_fn(black_box(1.0), black_box(2.7), black_box(1.0), &p))
    });
}

fn bench_density(c: &mut Criterion) {
    let p = reference_params();
    let rep = transition_rep(1.0, 1.0, &p).unwrap();
    c.bench_function("transition_density", |b| {
        b.iter(|| transition_density(black_box(1.3), &rep))
    });
}

fn bench_prices(c: &mut Criterion) {
    let p = reference_params();
    let f = TestFunction::gaussian(0.0, 1.0).unwrap();
    let cfg = QuadratureConfig::default();
    c.bench_function("price_inversion", |b| {
        b.iter(|| expectation_via_inversion(&f, 1.0, black_box(1.0), &p, &cfg).unwrap())
    });
    let rep = transition_rep(1.0, 1.0, &p).unwrap();
    c.bench_function("price_density", |b| {
        b.iter(|| expectation_via_density(|y| f.evaluate(y), &rep, &cfg).unwrap())
    });
}

fn bench_sampling(c: &mut Criterion) {
    let p = reference_params();
    c.bench_function("sample_exact", |b| {
        let mut rng = StreamKey::new(1, 0).rng();
        b.iter(|| sample_exact(1.0, 1.0, &p, &mut rng).unwrap())
    });
    c.bench_function("mc_expectation_100k", |b| {
        let f = TestFunction::gaussian(0.0, 1.0).unwrap();
        let cfg = MCConfig::new(100_000, 42);
        b.iter(|| mc_expectation(|y| f.evaluate(y), 1.0, 1.0, &p, &cfg).unwrap())
    });
}

fn bench_greeks(c: &mut Criterion) {
    let p = reference_params();
    let f = TestFunction::gaussian(0.0, 1.0).unwrap();
    let be = ExpectationBackend::Inversion(QuadratureConfig::default());
    c.bench_function("delta_shift_inversion", |b| {
        b.iter(|| delta_shift(&f, 1.0, black_box(1.0), &p, &be).unwrap())
    });
}

criterion_group!(
    benches,
    bench_char_fn,
    bench_density,
    bench_prices,
    bench_sampling,
    bench_greeks
);
criterion_main!(benches);
