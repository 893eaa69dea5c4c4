use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use realzeros::{
    count_zeros_grid, CoeffDistribution, EnsembleKind, GridParams, IntervalSpec, SampleFunction,
    TrialStream, DEFAULT_TAIL_EPS,
};

fn sample(e: EnsembleKind, n: u64, t_max: f64) -> SampleFunction {
    let stream = TrialStream::new(1, 0, CoeffDistribution::Rademacher);
    SampleFunction::draw(e, n, t_max, DEFAULT_TAIL_EPS, &stream).unwrap()
}

fn eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("eval_normalized");
    for (e, t) in [
        (EnsembleKind::Sp, 1.2),
        (EnsembleKind::Faf, 1.0),
        (EnsembleKind::Haf, 0.7),
        (EnsembleKind::Wp, 0.7),
    ] {
        for n in [100u64, 1600, 10_000] {
            let f = sample(e, n, t);
            group.bench_with_input(BenchmarkId::new(e.tag(), n), &f, |b, f| {
                b.iter(|| f.eval_unchecked(black_box(t)))
            });
        }
    }
    group.finish();

    let f = sample(EnsembleKind::Faf, 1600, 1.0);
    c.bench_function("eval_reference/FAF/1600", |b| {
        b.iter(|| f.eval_reference(black_box(1.0)).unwrap())
    });
}

fn grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("count_zeros_grid");
    group.sample_size(20);
    for (e, a, b) in [
        (EnsembleKind::Sp, 0.5, 1.5),
        (EnsembleKind::Faf, 0.2, 1.2),
        (EnsembleKind::Haf, 0.2, 0.8),
        (EnsembleKind::Wp, 0.2, 0.8),
    ] {
        let iv = IntervalSpec::new(a, b).unwrap();
        let n = 1600;
        let f = sample(e, n, b);
        let rate = (n as f64 * e.max_gamma(&iv).unwrap()).sqrt() / std::f64::consts::PI;
        let params = GridParams::default();
        group.bench_function(BenchmarkId::new(e.tag(), n), |bch| {
            bch.iter(|| count_zeros_grid(|t| f.eval_unchecked(t), &iv, rate, &params).unwrap())
        });
    }
    group.finish();
}

fn draw(c: &mut Criterion) {
    let mut group = c.benchmark_group("draw_coeffs");
    for d in [
        CoeffDistribution::Rademacher,
        CoeffDistribution::StandardGaussian,
    ] {
        let stream = TrialStream::new(7, 3, d);
        group.bench_function(d.to_string(), |b| {
            b.iter(|| stream.draw_coeffs(black_box(4096)))
        });
    }
    group.finish();
}

criterion_group!(benches, eval, grid, draw);
criterion_main!(benches);
