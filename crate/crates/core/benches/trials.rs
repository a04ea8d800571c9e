use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use squats::codebook::{Codebook, CodebookParams};
use squats::experiment::{run_sweep, ExperimentConfig};
use squats::{decode_ml, encode, gen_signal, rng, Execution, MlOptions, ScalarQuantizer};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn codebook_generation(c: &mut Criterion) {
    let mut g = c.benchmark_group("codebook");
    let params = CodebookParams::new(1000, 64, 3, 512, 7);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "T1000-l64-b512"), |b| {
            b.iter(|| Codebook::generate_with(black_box(params), exec).unwrap())
        });
    }
    g.finish();
}

fn ml_trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("ml-trials");
    g.sample_size(20);
    let (t, k, l, bits) = (100, 3, 256, 100);
    let cb = Codebook::generate(CodebookParams::new(t, l, k, bits, 3)).unwrap();
    let qz = ScalarQuantizer::gaussian_loaded(l).unwrap();
    let opts = MlOptions::new(k);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "64-trials"), |b| {
            b.iter(|| {
                exec.map(64, |trial| {
                    let s = gen_signal(t, k, rng::derive_seed(11, &[trial as u64])).unwrap();
                    let reg = encode(s.values(), &cb, &qz).unwrap();
                    decode_ml(&reg, &cb, &qz, &opts).map(|r| r.support.len()).unwrap_or(0)
                })
            })
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = ExperimentConfig {
            t: 100,
            k: 3,
            rates: vec![0.5, 1.0],
            trials: 20,
            execution: exec,
            ..ExperimentConfig::default()
        };
        g.bench_function(BenchmarkId::new(name, "single-2-rates"), |b| {
            b.iter(|| run_sweep(black_box(&cfg)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, codebook_generation, ml_trials, sweep);
criterion_main!(benches);
