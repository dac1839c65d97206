use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use reqcast_bench::{filled_store, synthetic_weeks};
use reqcast_core::llr::llr_predict;
use reqcast_core::poisson::{fit_counts, poisson_quantile};
use reqcast_core::{predict_step, run, Bandwidth, ForecastConfig, KernelFamily, KernelSpec, PoissonParam};

fn llr(c: &mut Criterion) {
    let mut group = c.benchmark_group("llr_predict");
    for n in [6usize, 25, 50, 100] {
        let ds = filled_store(336, 4);
        let points = ds.extract_window(n).unwrap().points();
        for (name, family) in [("epanechnikov", KernelFamily::Epanechnikov), ("gaussian", KernelFamily::Gaussian)] {
            let spec = KernelSpec { family, bandwidth: Bandwidth::KNearest(20) };
            group.bench_with_input(BenchmarkId::new(name, n), &points, |b, pts| {
                b.iter(|| llr_predict(black_box(pts), n as f64, &spec).unwrap())
            });
        }
    }
    group.finish();
}

fn poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("poisson");
    for lambda in [1.0, 100.0, 10_000.0] {
        let param = PoissonParam::new(lambda).unwrap();
        group.bench_with_input(BenchmarkId::new("quantile_p99", lambda), &param, |b, &p| {
            b.iter(|| poisson_quantile(black_box(p), 0.99).unwrap())
        });
    }
    let samples: Vec<u64> = (0..30).map(|i| (i * 7 % 11) as u64).collect();
    group.bench_function("mle_30_samples", |b| b.iter(|| fit_counts(black_box(&samples)).unwrap()));
    group.finish();
}

fn forecaster(c: &mut Criterion) {
    let obs = synthetic_weeks(1);
    let mut group = c.benchmark_group("forecaster");
    group.sample_size(10);
    for up_tps in [6usize, 50] {
        let cfg = ForecastConfig { up_tps, ..ForecastConfig::default() };
        group.bench_with_input(BenchmarkId::new("run_three_weeks", up_tps), &cfg, |b, cfg| {
            b.iter(|| run(black_box(&obs), cfg).unwrap())
        });
    }
    let ds = filled_store(336, 2);
    let cfg = ForecastConfig::default();
    group.bench_function("predict_step", |b| b.iter(|| predict_step(black_box(&ds), &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, llr, poisson, forecaster);
criterion_main!(benches);
