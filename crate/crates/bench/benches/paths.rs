use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use homog_bench::lifted_fbm;
use homog_core::gaussian_paths::{fgn_sample, FouConfig, FouSampler};
use homog_core::hermite_process::{HermiteSampler, HermiteSpec};
use homog_core::rough::{rde_solve, LinearField};

fn fgn(c: &mut Criterion) {
    let mut g = c.benchmark_group("fgn");
    for n in [1 << 10, 1 << 14, 1 << 17] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| fgn_sample(0.7, n, 1.0 / n as f64, 7).unwrap())
        });
    }
    g.finish();
}

fn fou(c: &mut Criterion) {
    let mut g = c.benchmark_group("fou");
    for eps in [1e-2, 1e-3] {
        let sampler = FouSampler::new(FouConfig::new(0.75, eps).unwrap(), 1.0, eps / 10.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(eps), &sampler, |b, s| b.iter(|| s.sample(3).unwrap()));
    }
    g.finish();
}

fn hermite(c: &mut Criterion) {
    let mut g = c.benchmark_group("hermite");
    g.sample_size(10);
    for m in [1, 2, 3] {
        let spec = HermiteSpec::calibrated(m, 0.8, 2e-2).unwrap();
        let sampler = HermiteSampler::new(spec, 1.0, 2e-2).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(m), &sampler, |b, s| b.iter(|| s.sample(5).unwrap()));
    }
    g.finish();
}

fn rde(c: &mut Criterion) {
    let drive = lifted_fbm(0.6, 1e-3, 11);
    let field = LinearField { m: 1, c: vec![0.5, -0.3] };
    c.bench_function("rde/linear_2d", |b| b.iter(|| rde_solve(&field, &drive, &[1.0]).unwrap()));
}

criterion_group!(benches, fgn, fou, hermite, rde);
criterion_main!(benches);
