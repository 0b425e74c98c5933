use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use transport_bench::{focus_problem, gradient_problem, jordan_like};
use transport_core::spectral::kernel_basis;
use transport_core::{
    assemble, compute_m, solve_to_order, FieldSampler, FlowConfig, SolutionEvaluator,
    SolverConfig,
};

fn bench_assemble(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble");
    for order in [4, 8, 12] {
        let p = focus_problem(order);
        g.bench_with_input(BenchmarkId::from_parameter(order), &p, |b, p| {
            b.iter(|| assemble(black_box(p)))
        });
    }
    g.finish();
}

fn bench_solve(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("solve_to_order");
    for order in [4, 8, 12] {
        let p = focus_problem(order);
        g.bench_with_input(BenchmarkId::from_parameter(order), &p, |b, p| {
            b.iter(|| solve_to_order(black_box(p), order, &cfg).unwrap())
        });
    }
    g.finish();
    let p = gradient_problem(4);
    c.bench_function("kernel_basis/resonant", |b| {
        b.iter(|| kernel_basis(black_box(&p), &cfg).unwrap())
    });
}

fn bench_flow(c: &mut Criterion) {
    let p = focus_problem(3);
    let s = FieldSampler::from_problem(&p);
    let ev = SolutionEvaluator::new(&s, &p, &FlowConfig::default(), &SolverConfig::default()).unwrap();
    c.bench_function("evaluate_solution/point", |b| {
        b.iter(|| ev.eval(black_box(&[0.1, -0.05])).unwrap())
    });
    let points: Vec<Vec<f64>> = (0..64)
        .map(|i| {
            let a = i as f64 * 0.1;
            vec![0.15 * a.cos(), 0.15 * a.sin()]
        })
        .collect();
    c.bench_function("evaluate_solution/grid64", |b| {
        b.iter(|| ev.eval_grid(black_box(&points)))
    });
}

fn bench_estimates(c: &mut Criterion) {
    let a0 = jordan_like();
    c.bench_function("compute_m/3x3", |b| {
        b.iter(|| compute_m(black_box(&a0), 0.25).unwrap())
    });
}

criterion_group!(benches, bench_assemble, bench_solve, bench_flow, bench_estimates);
criterion_main!(benches);
