use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mpl_bench::{ctc_fixture, model_fixture};
use mpl_core::{best_path_decode, ctc_log_prob, ctc_loss_and_grad, forward, loss_and_gradient};

fn ctc(c: &mut Criterion) {
    let mut group = c.benchmark_group("ctc");
    for frames in [25, 50, 100] {
        let (grid, label) = ctc_fixture(frames, 8, frames / 5, 7);
        group.bench_with_input(BenchmarkId::new("log_prob", frames), &frames, |b, _| {
            b.iter(|| ctc_log_prob(black_box(&grid), black_box(&label)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("loss_and_grad", frames), &frames, |b, _| {
            b.iter(|| ctc_loss_and_grad(black_box(&grid), black_box(&label)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("decode", frames), &frames, |b, _| {
            b.iter(|| best_path_decode(black_box(&grid)))
        });
    }
    group.finish();
}

fn model(c: &mut Criterion) {
    let mut group = c.benchmark_group("model");
    for frames in [25, 50] {
        let (params, x, label) = model_fixture(frames, 3);
        group.bench_with_input(BenchmarkId::new("forward", frames), &frames, |b, _| {
            b.iter(|| forward(black_box(&params), black_box(x.view())).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("loss_and_gradient", frames), &frames, |b, _| {
            b.iter(|| loss_and_gradient(black_box(&params), black_box(x.view()), black_box(&label)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ctc, model);
criterion_main!(benches);
