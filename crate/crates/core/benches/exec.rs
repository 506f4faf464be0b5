//! Sequential versus rayon-parallel execution of the frame-level hot paths.
//! Without the `parallel` feature both variants run the same loop.

use avatarforge_core::backends::BackendSuite;
use avatarforge_core::consistency::{frame_brisque, frame_niqe, sequence_consistency, PairMetric};
use avatarforge_core::media::{ImageBuffer, PoseFrame};
use avatarforge_core::nss::{brisque_features, fit_mvg, niqe_features, SvrModel, FEATURE_DIM};
use avatarforge_core::pipeline::{synthesize_video, PipelineConfig, PromptSpec};
use avatarforge_core::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

/// Smooth shading plus grain, so NSS fits have something to model.
fn textured(seed: u64, size: usize) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grain: Vec<f64> = (0..size * size).map(|_| rng.random_range(-0.08..0.08)).collect();
    let phase = seed as f64;
    ImageBuffer::from_fn_rgb(size, size, |x, y| {
        let s = 0.5 + 0.3 * ((x as f64 / 9.0 + phase).sin() * (y as f64 / 13.0).cos()) + grain[y * size + x];
        [s, 0.8 * s, 0.6 * s]
    })
}

fn frames(n: usize, size: usize) -> Vec<ImageBuffer> {
    (0..n as u64).map(|s| textured(s, size)).collect()
}

fn nss(c: &mut Criterion) {
    let video = frames(16, 128);
    let gray: Vec<ImageBuffer> = video.iter().map(ImageBuffer::to_gray).collect();
    let rows: Vec<[f64; FEATURE_DIM]> = gray.iter().flat_map(|g| niqe_features(g).unwrap()).collect();
    let pristine = fit_mvg(&rows).unwrap();
    let feats: Vec<[f64; FEATURE_DIM]> = gray.iter().map(|g| brisque_features(g).unwrap()).collect();
    let svr = SvrModel {
        gamma: 0.05,
        rho: 0.0,
        dual_coefs: vec![1.0; feats.len()],
        support_vectors: feats.iter().map(|f| f.iter().map(|v| v.tanh()).collect()).collect(),
        feature_min: vec![-1.0; FEATURE_DIM],
        feature_max: vec![1.0; FEATURE_DIM],
    };

    let mut g = c.benchmark_group("frame_quality_16x128");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_with_input(BenchmarkId::new("niqe", name), &exec, |b, &e| {
            b.iter(|| frame_niqe(black_box(&video), &pristine, e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("brisque", name), &exec, |b, &e| {
            b.iter(|| frame_brisque(black_box(&video), &svr, e).unwrap())
        });
    }
    g.finish();
}

fn consistency(c: &mut Criterion) {
    let video = frames(48, 256);
    let mut g = c.benchmark_group("frame_mse_48x256");
    for (name, exec) in STRATEGIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| sequence_consistency(black_box(&video), PairMetric::Mse, e).unwrap())
        });
    }
    g.finish();
}

fn synthesis(c: &mut Criterion) {
    let spec = PromptSpec::new("linen shirt", "woman with red hair", "harbor at noon").unwrap();
    let poses: Vec<PoseFrame> = (0..8).map(|t| PoseFrame::stick_figure(56.0 + 2.0 * t as f64, 64.0, 0.7 * t as f64)).collect();
    let mut g = c.benchmark_group("synthesize_8x128");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        let mut cfg = PipelineConfig::new(BackendSuite::mock());
        cfg.width = 128;
        cfg.height = 128;
        cfg.exec = exec;
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| synthesize_video(black_box(&spec), &poses, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, nss, consistency, synthesis);
criterion_main!(benches);
