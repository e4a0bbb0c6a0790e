//! One small sweep on a single worker versus the default pool.
//!
//! `cargo bench -p dpmimo` measures the rayon build; add
//! `--no-default-features` for the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpmimo::beamforming::Scheme;
use dpmimo::harness::{self, ExperimentPlan};
use dpmimo::par;
use dpmimo::se::Bound;

fn plan() -> ExperimentPlan {
    let mut p = ExperimentPlan::new("bench");
    p.m_list = vec![64];
    p.schemes = vec![Scheme::Mmse, Scheme::Mr];
    p.bounds = vec![Bound::UlUatf, Bound::DlSic];
    p.setups = 8;
    p.trials = 64;
    p.normalization_trials = 64;
    p
}

fn sweep(c: &mut Criterion) {
    let p = plan();
    let hash = p.hash();
    let mode = if cfg!(feature = "parallel") { "rayon" } else { "sequential" };
    let mut group = c.benchmark_group(format!("sweep_{mode}"));
    group.sample_size(10);
    for threads in [Some(1), None] {
        let label = threads.map_or("default".to_string(), |n| n.to_string());
        group.bench_with_input(BenchmarkId::new("threads", label), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || harness::execute(&p, &hash)).unwrap().unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
