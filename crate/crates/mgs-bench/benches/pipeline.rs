use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mgs_bench::{random_model, target};
use mgs_core::grad::backward;
use mgs_core::image::Image;
use mgs_core::loss::{recon_loss, LossConfig};
use mgs_core::render::{render, RenderSettings};
use mgs_core::train::{TrainConfig, Trainer};

fn bench_render_prefixes(c: &mut Criterion) {
    let model = random_model(2000, 128, 128, 1);
    let settings = RenderSettings::default();
    let mut group = c.benchmark_group("render_prefix");
    for ratio in [0.01, 0.1, 0.5, 1.0] {
        let k = ((ratio * model.len() as f64).ceil() as usize).max(1);
        group.bench_with_input(BenchmarkId::from_parameter(ratio), &k, |b, &k| {
            b.iter(|| render(black_box(&model), k, &settings).unwrap());
        });
    }
    group.finish();
}

fn bench_backward(c: &mut Criterion) {
    let model = random_model(2000, 128, 128, 2);
    let settings = RenderSettings::default();
    let mut grad = Image::new(128, 128);
    for (i, v) in grad.data_mut().iter_mut().enumerate() {
        *v = ((i % 17) as f64 - 8.0) / 1000.0;
    }
    c.bench_function("backward_full", |b| {
        b.iter(|| backward(black_box(&model), 2000, &settings, &grad).unwrap());
    });
}

fn bench_recon_loss(c: &mut Criterion) {
    let model = random_model(2000, 128, 128, 3);
    let settings = RenderSettings::default();
    let rendered = render(&model, model.len(), &settings).unwrap();
    let reference = target(128, 128);
    let cfg = LossConfig::default();
    c.bench_function("recon_loss_128", |b| {
        b.iter(|| recon_loss(black_box(&rendered), &reference, &cfg).unwrap());
    });
}

fn bench_train_step(c: &mut Criterion) {
    let reference = target(128, 128);
    c.bench_function("train_step_n2000", |b| {
        b.iter_batched(
            || {
                let model = random_model(2000, 128, 128, 4);
                Trainer::new(model, reference.clone(), TrainConfig::default()).unwrap()
            },
            |mut trainer| {
                trainer.step().unwrap();
            },
            criterion::BatchSize::LargeInput,
        );
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_render_prefixes, bench_backward, bench_recon_loss, bench_train_step
}
criterion_main!(benches);
