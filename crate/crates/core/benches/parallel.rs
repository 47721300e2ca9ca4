use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use embed_router_core::data::{DatasetSpec, SynthParams};
use embed_router_core::experiment::{evaluate, ExperimentConfig, FaMode};
use embed_router_core::matcher::build_centroids;
use embed_router_core::{Autoencoder, Exec, Matrix, Rng, TrainConfig, INPUT_DIM};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn batch(rows: usize) -> Matrix {
    let mut rng = Rng::new(1);
    Matrix::new(rows, INPUT_DIM, (0..rows * INPUT_DIM).map(|_| rng.next_f64()).collect()).unwrap()
}

fn embed_rows(c: &mut Criterion) {
    let ae = Autoencoder::init(0);
    let x = batch(2048);
    let mut g = c.benchmark_group("embed_rows_2048");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| ae.embed_rows(&x, exec).unwrap()));
    }
    g.finish();
}

fn centroids(c: &mut Criterion) {
    let ae = Autoencoder::init(0);
    let spec = DatasetSpec::synthetic(
        "bench",
        10,
        SynthParams {
            samples_per_class: 200,
            ..SynthParams::default()
        },
    );
    let ds = spec.load(std::path::Path::new("."), 3).unwrap();
    let mut g = c.benchmark_group("build_centroids_2000");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_centroids(&ae, &ds, 0, exec).unwrap())
        });
    }
    g.finish();
}

fn small_evaluation(c: &mut Criterion) {
    let params = |lo, hi| SynthParams {
        samples_per_class: 40,
        proto_min: lo,
        proto_max: hi,
        ..SynthParams::default()
    };
    let base = ExperimentConfig {
        datasets: vec![
            DatasetSpec::synthetic("p", 5, params(0.0, 0.4)),
            DatasetSpec::synthetic("q", 5, params(0.6, 1.0)),
            DatasetSpec::synthetic("r", 5, params(0.2, 0.6)),
        ],
        seed: 0,
        shared_seed: true,
        train: TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        },
        output_dir: "unused".into(),
        fa_mode: FaMode::ClientEmbedding,
        data_dir: ".".into(),
        exec: Exec::Sequential,
    };
    let mut g = c.benchmark_group("evaluate_3x200");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = ExperimentConfig { exec, ..base.clone() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| evaluate(&cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, embed_rows, centroids, small_evaluation);
criterion_main!(benches);
