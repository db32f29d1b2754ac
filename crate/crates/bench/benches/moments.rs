use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pitman_core::asymptotics::{GAlphaSeries, DEFAULT_MAX_TERMS};
use pitman_core::distribution::{exact_moment, length_pmf};
use pitman_core::{Mode, Number, PitmanParams};

fn moments(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_moment");
    for n in [100u64, 10_000, 1 << 20] {
        let params = PitmanParams::parse(n, "1/2", "1").unwrap();
        group.bench_with_input(BenchmarkId::new("float128_r4", n), &params, |b, p| {
            b.iter(|| exact_moment(black_box(p), 4, Mode::approx(128)).unwrap())
        });
    }
    let params = PitmanParams::parse(60, "1/3", "1/2").unwrap();
    group.bench_function("rational_n60_r4", |b| {
        b.iter(|| exact_moment(black_box(&params), 4, Mode::Exact).unwrap())
    });
    group.finish();
}

fn pmf(c: &mut Criterion) {
    let mut group = c.benchmark_group("length_pmf");
    group.sample_size(20);
    for n in [50u64, 200] {
        let params = PitmanParams::parse(n, "1/2", "1").unwrap();
        group.bench_with_input(BenchmarkId::new("exact", n), &params, |b, p| {
            b.iter(|| length_pmf(black_box(p), Mode::Exact).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("float128", n), &params, |b, p| {
            b.iter(|| length_pmf(black_box(p), Mode::approx(128)).unwrap())
        });
    }
    group.finish();
}

fn galpha(c: &mut Criterion) {
    let mut group = c.benchmark_group("galpha_density");
    for alpha in ["1/4", "1/2", "3/4"] {
        let series = GAlphaSeries::new(&Number::exact(alpha.parse().unwrap())).unwrap();
        // warm the coefficient cache so the loop measures summation
        series.eval(4.0, 1e-15, DEFAULT_MAX_TERMS).unwrap();
        group.bench_function(BenchmarkId::new("x4", alpha), |b| {
            b.iter(|| series.eval(black_box(4.0), 1e-15, DEFAULT_MAX_TERMS).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, moments, pmf, galpha);
criterion_main!(benches);
