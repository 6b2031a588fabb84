use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fan_core::data::{generate_synthetic, SplitRatios, SyntheticSpec};
use fan_core::models::BackboneKind;
use fan_core::normalizers::NormalizerKind;
use fan_core::spectral;
use fan_core::training::{evaluate, prepare, NonstatMode, Pipeline, PipelineConfig};
use fan_core::Exec;
use ndarray::Array2;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn rows(n: usize, len: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, len), |(r, t)| {
        let t = t as f64;
        (t * (0.1 + r as f64 * 0.003)).sin() + 0.5 * (t * 0.37).cos() + 0.01 * r as f64
    })
}

fn bench_frl(c: &mut Criterion) {
    let mut group = c.benchmark_group("frl_rows");
    let x = rows(32 * 9, 96);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| spectral::frl_rows(black_box(x.view()), 3, None, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_variance(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral_variance");
    // 256 windows of 96 steps × 4 channels
    let data: Vec<Array2<f64>> = (0..256).map(|i| rows(4 + i % 3, 96).reversed_axes().slice(ndarray::s![.., 0..4]).to_owned()).collect();
    let views: Vec<_> = data.iter().map(|w| w.view()).collect();
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| spectral::spectral_variance_with(black_box(&views), exec).unwrap())
        });
    }
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    let mut spec = SyntheticSpec::preset("syn5", 1).unwrap();
    spec.length = 3000;
    let ratios = SplitRatios::default();
    let frame = generate_synthetic(&spec, &ratios).unwrap();
    let (_, splits) = prepare(&frame, 96, 96, &ratios).unwrap();
    let config = PipelineConfig {
        lookback: 96,
        horizon: 96,
        k: 5,
        normalizer: NormalizerKind::Fan,
        backbone: BackboneKind::Dlinear,
        kernel: 25,
        predictor_hidden: vec![64, 128],
        nonstat: NonstatMode::Predict,
    };
    let pipeline = Pipeline::init(config, None, 1).unwrap();
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| evaluate(&pipeline, black_box(&splits.val), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_frl, bench_variance, bench_evaluate);
criterion_main!(benches);
