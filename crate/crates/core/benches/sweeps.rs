//! Parallel versus single-threaded throughput of the sweep kernels.
//!
//! The "sequential" arm runs inside a one-thread pool, which takes the plain
//! iterator path; build with `--no-default-features` to drop rayon entirely.

use std::f64::consts::FRAC_PI_2;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use torus_psido::kernel::{kernel_sum, KernelRegularizer, Sign};
use torus_psido::lattice::TruncationBox;
use torus_psido::oracles::{empirical_operator_norm, ProbeSpec};
use torus_psido::par;
use torus_psido::spaces::{besov_norm, DyadicDecomposition};
use torus_psido::symbol::{class_norm, parabolicity_estimate, LambdaPlan, Symbol};
use torus_psido::transform::quantize_apply;

fn arms() -> [(&'static str, Option<usize>); 2] {
    [("sequential", Some(1)), ("parallel", None)]
}

fn symbol_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("symbol");
    group.sample_size(10);
    let jordan = Symbol::jordan(2, 3, 2.0);
    let plan = LambdaPlan {
        radius: 24,
        rays: vec![0.0, FRAC_PI_2, -FRAC_PI_2],
        ..LambdaPlan::default()
    };
    for (name, threads) in arms() {
        group.bench_with_input(BenchmarkId::new("class_norm", name), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || class_norm(&jordan, TruncationBox::new(2, 48)).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("parabolicity", name), &threads, |b, &t| {
            b.iter(|| par::with_threads(t, || parabolicity_estimate(&jordan, &plan)))
        });
    }
    group.finish();
}

fn operator_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator");
    group.sample_size(10);
    let a = Symbol::shifted_laplacian(2, 1);
    let spec = ProbeSpec { n: 2, d: 1, size: 64, radius: 31 };
    let dec = DyadicDecomposition::for_band(31);
    let reg = KernelRegularizer::new(0.01).unwrap();
    for (name, threads) in arms() {
        group.bench_with_input(BenchmarkId::new("probe_batch", name), &threads, |b, &t| {
            b.iter(|| {
                par::with_threads(t, || {
                    empirical_operator_norm(
                        |u| quantize_apply(&a, u).unwrap(),
                        |u| besov_norm(u, 2.0, 2.0, 2.0, &dec).unwrap(),
                        |u| besov_norm(u, 0.0, 2.0, 2.0, &dec).unwrap(),
                        spec,
                        64,
                        1,
                    )
                })
            })
        });
        group.bench_with_input(BenchmarkId::new("kernel_sum", name), &threads, |b, &t| {
            b.iter(|| {
                par::with_threads(t, || {
                    kernel_sum(&a, Complex64::new(0.0, 10.0), reg, Sign::Plus, TruncationBox::new(2, 127), 256).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, symbol_sweeps, operator_sweeps);
criterion_main!(benches);
