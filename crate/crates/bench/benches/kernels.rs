use std::hint::black_box;

use criterion::*;
use qcorr_bench::{correlated, random_pure};
use qcorr_core::complexity::{marginal_complexity, min_product_cover, CoverMode};
use qcorr_core::psd_rank::{fit, FitOptions};
use qcorr_core::spectral::support_decomposition;
use qcorr_core::synthesis::{canonical_seed, simulate_protocol, truncate_pure};

fn bench_marginals(c: &mut Criterion) {
    let mut g = c.benchmark_group("marginal_complexity");
    for dims in [vec![2, 2, 2], vec![3, 3, 3], vec![4, 4, 4], vec![2, 2, 2, 2, 2, 2]] {
        let psi = random_pure(&dims, 1);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{dims:?}")), &psi, |b, psi| b.iter(|| marginal_complexity(black_box(psi))));
    }
    g.finish();
}

fn bench_synthesis(c: &mut Criterion) {
    let psi = random_pure(&[4, 4, 4], 2);
    c.bench_function("canonical_seed/4x4x4", |b| b.iter(|| canonical_seed(black_box(&psi)).unwrap()));
    let p = canonical_seed(&psi).unwrap();
    c.bench_function("simulate_protocol/4x4x4", |b| b.iter(|| simulate_protocol(black_box(&p)).unwrap()));
    c.bench_function("truncate_pure/4x4x4", |b| b.iter(|| truncate_pure(black_box(&psi), 0.1).unwrap()));
}

fn bench_cover(c: &mut Criterion) {
    let sd = support_decomposition(&random_pure(&[3, 3, 3], 3));
    let mut g = c.benchmark_group("min_product_cover/3x3x3");
    for mode in [CoverMode::Brute, CoverMode::Greedy] {
        g.bench_function(format!("{mode:?}"), |b| b.iter(|| min_product_cover(&sd.shape(), black_box(&sd.coefficients), 0.2, mode).unwrap()));
    }
    g.finish();
}

fn bench_fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("psd_fit");
    g.sample_size(10);
    let opts = FitOptions { restarts: 4, ..FitOptions::default() };
    for d in [2, 3] {
        let p = correlated(d);
        g.bench_with_input(BenchmarkId::new("correlated", d), &p, |b, p| b.iter(|| fit(black_box(p), d, &opts).unwrap()));
    }
    g.finish();
}

criterion_group!(spectral, bench_marginals, bench_cover);
criterion_group!(synthesis, bench_synthesis);
criterion_group!(psd, bench_fit);
criterion_main!(spectral, synthesis, psd);
