use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cubature::cubature::expectation_formula;
use cubature::{
    gamma_partition, greek_iterated, signature, AlgebraContext, GreekRequest, ModelConfig, Payoff,
    PiecewisePath, TensorElement, VectorFieldSystem,
};

fn element(ctx: &std::sync::Arc<AlgebraContext>, seed: f64) -> TensorElement {
    let coeffs = (0..ctx.dim()).map(|i| ((i as f64 + seed) * 0.618).sin()).collect();
    TensorElement::from_dense(ctx, coeffs).unwrap()
}

fn tensor_mul(c: &mut Criterion) {
    let mut g = c.benchmark_group("tensor_mul");
    for (d, m) in [(2, 4), (2, 6), (3, 4)] {
        let ctx = AlgebraContext::new(d, m).unwrap();
        let (a, b) = (element(&ctx, 0.3), element(&ctx, 1.7));
        g.bench_with_input(BenchmarkId::from_parameter(format!("d{d}_m{m}")), &(a, b), |bch, (a, b)| {
            bch.iter(|| black_box(a).mul(black_box(b)).unwrap())
        });
    }
    g.finish();
}

fn path_signature(c: &mut Criterion) {
    let ctx = AlgebraContext::new(2, 5).unwrap();
    // Time coordinate first, then the two Brownian coordinates.
    let increments: Vec<Vec<f64>> = (0..64)
        .map(|i| vec![1.0 / 64.0, (i as f64 * 0.37).sin() * 0.1, (i as f64 * 0.53).cos() * 0.1])
        .collect();
    let path = PiecewisePath::from_increments(1.0, &increments).unwrap();
    c.bench_function("signature_d2_m5_64_segments", |b| {
        b.iter(|| signature(&ctx, black_box(&path)).unwrap())
    });
}

fn formula_build(c: &mut Criterion) {
    let ctx = AlgebraContext::new(2, 3).unwrap();
    c.bench_function("expectation_formula_d2_m3", |b| {
        b.iter(|| expectation_formula(&ctx, black_box(1.0)).unwrap())
    });
}

fn iterated_greek(c: &mut Criterion) {
    let system = VectorFieldSystem::from_config(&ModelConfig::BlackScholes { r: 0.05, sigma: 0.3 }).unwrap();
    let payoff = Payoff::SmoothedCall { strike: 1.0, eps: 0.05 };
    let mut g = c.benchmark_group("greek_iterated");
    g.sample_size(10);
    for k in [2, 4] {
        let partition = gamma_partition(1.0, 0.1, k, 3.0).unwrap();
        let req = GreekRequest::new(&system, payoff.clone(), vec![1.0], vec![1.0], 1.0, 2, 3, partition).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(k), &req, |b, req| {
            b.iter(|| greek_iterated(black_box(req)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, tensor_mul, path_signature, formula_build, iterated_greek);
criterion_main!(benches);
