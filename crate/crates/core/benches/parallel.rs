//! Data-parallel kernels on one thread versus the full pool. Build with
//! `--no-default-features` to measure the sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pass_core::classifier::{init_mlp, predict_all, TrainConfig};
use pass_core::data::{generate_gaussian_mixture, inject_idn_noise, split};
use pass_core::numerics::derive_stream;
use pass_core::selectors::{pass_train, SelectorConfig};

fn pools() -> Vec<(String, Option<usize>)> {
    if cfg!(feature = "parallel") {
        let all = std::thread::available_parallelism().map_or(1, |n| n.get());
        vec![("rayon-1".into(), Some(1)), (format!("rayon-{all}"), Some(all))]
    } else {
        vec![("sequential".into(), None)]
    }
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        return rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(f);
    }
    let _ = threads;
    f()
}

fn bench(c: &mut Criterion) {
    let clean = generate_gaussian_mixture(5000, 10, 5, 4.0, 1).unwrap();
    let ds = inject_idn_noise(&clean, 0.4, 1).unwrap();
    let sp = split(&ds, 0.2, 1).unwrap();
    let params = init_mlp(10, &[64, 64], 5, &mut derive_stream(1, 0));
    let train = TrainConfig::default();
    let selector = SelectorConfig {
        warmup_epochs: 1,
        total_epochs: 2,
        ..SelectorConfig::default()
    };

    let mut group = c.benchmark_group("predict_all");
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| in_pool(threads, || predict_all(&params, &ds, &sp.train).unwrap()))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("pass_two_epochs");
    group.sample_size(10);
    for (name, threads) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| in_pool(threads, || pass_train(&ds, &sp, &selector, &train, 1).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
