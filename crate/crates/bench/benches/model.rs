use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mictact::model::{loss_and_grad, ModelConfig, ModelParams, Target};
use mictact::sim::NUM_MICS;
use mictact::Task;

fn window(n: usize, phase: f64) -> Vec<f32> {
    (0..n * NUM_MICS).map(|i| ((i as f64 * 0.05 + phase).sin() * 30.0) as f32).collect()
}

fn forward(c: &mut Criterion) {
    for task in Task::ALL {
        let params = ModelParams::init(ModelConfig::for_task(task), 42).unwrap();
        let x = window(task.default_window(), 0.3);
        c.bench_function(&format!("forward {task}"), |b| {
            b.iter(|| params.forward(black_box(&x)).unwrap())
        });
    }
}

fn train_step(c: &mut Criterion) {
    for task in Task::ALL {
        let params = ModelParams::init(ModelConfig::for_task(task), 42).unwrap();
        let xs: Vec<Vec<f32>> = (0..64).map(|k| window(task.default_window(), k as f64)).collect();
        let refs: Vec<&[f32]> = xs.iter().map(|x| x.as_slice()).collect();
        let targets: Vec<Target> = (0..64)
            .map(|k| match task {
                Task::Texture => Target::Class(k % 4),
                Task::Localize => Target::Values(vec![12.0, 12.0]),
                Task::Velocity => Target::Values(vec![40.0]),
            })
            .collect();
        let mut g = c.benchmark_group("forward+backward batch 64");
        g.sample_size(10);
        g.bench_function(task.name(), |b| {
            b.iter(|| loss_and_grad(&params, black_box(&refs), &targets).unwrap())
        });
        g.finish();
    }
}

criterion_group!(benches, forward, train_step);
criterion_main!(benches);
