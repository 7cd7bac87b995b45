//! Data-parallel kernels on one worker thread vs the full rayon pool.
//!
//! Built with `--no-default-features` the kernels run the sequential
//! fallback and only the `sequential` variant is measured.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgdebias_core::nudging::{apply_spectral_correction, project_trajectory, spectral_ratio};
use qgdebias_core::par;
use qgdebias_core::spectral_qg::{GridSpec, QgParams, Trajectory};
use qgdebias_core::stats::psd;

fn noise(nx: usize, len: usize, seed: u64) -> Trajectory {
    let grid = GridSpec::new(nx).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traj = Trajectory::new(grid, 0.5, 0.01, QgParams::for_grid(grid));
    let mut snap = vec![0.0; traj.snapshot_len()];
    for _ in 0..len {
        snap.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        traj.push(&snap);
    }
    traj
}

fn variants() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    if !par::is_parallel() {
        return vec![("sequential", None)];
    }
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("rayon-1", Some(one)), ("rayon-all", None)]
}

fn run<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn kernels(c: &mut Criterion) {
    let fine = noise(64, 64, 1);
    let v = noise(16, 512, 2);
    let v_tau = noise(16, 512, 3);
    let ratio = spectral_ratio(&v, &v_tau).unwrap();

    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    for (name, pool) in variants() {
        g.bench_function(BenchmarkId::new("project_64_to_16", name), |b| {
            b.iter(|| run(&pool, || project_trajectory(&fine, v.grid).unwrap()))
        });
        g.bench_function(BenchmarkId::new("spectral_ratio", name), |b| {
            b.iter(|| run(&pool, || spectral_ratio(&v, &v_tau).unwrap()))
        });
        g.bench_function(BenchmarkId::new("spectral_correction", name), |b| {
            b.iter(|| run(&pool, || apply_spectral_correction(&v_tau, &ratio).unwrap()))
        });
        g.bench_function(BenchmarkId::new("welch_psd", name), |b| b.iter(|| run(&pool, || psd(&v, 0).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
