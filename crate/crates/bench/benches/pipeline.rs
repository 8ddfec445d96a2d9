use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use netlds::estimator::solve_gram;
use netlds::spectral::default_frequency;
use netlds::theory::compute_constants;
use netlds::{expected_finite_psd, grid_graph, simulate_dft, GramProblem, ModelSpec, Regime, SolverOptions};

fn simulation(c: &mut Criterion) {
    let graph = grid_graph(4, 4).unwrap();
    let model = ModelSpec::default().build(&graph).unwrap();
    let f = default_frequency(32);
    let mut group = c.benchmark_group("simulate_dft");
    group.sample_size(10);
    for regime in [Regime::RestartRecord, Regime::Consecutive] {
        group.bench_with_input(BenchmarkId::new(regime.label(), 4096), &regime, |b, &regime| {
            b.iter(|| simulate_dft(&model, &graph, regime, 4096, 32, f, 1).unwrap())
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let graph = grid_graph(4, 4).unwrap();
    let model = ModelSpec::default().build(&graph).unwrap();
    let f = default_frequency(32);
    let psd = simulate_dft(&model, &graph, Regime::RestartRecord, 4096, 32, f, 2)
        .unwrap()
        .empirical_psd();
    let problem = GramProblem::from_empirical_psd(&psd.matrix, 5, 4096).unwrap();
    let lambda_max = problem.lambda_max();
    let opts = SolverOptions::default();
    let mut group = c.benchmark_group("solve_gram");
    for frac in [0.5, 0.1, 0.01] {
        group.bench_with_input(BenchmarkId::from_parameter(frac), &frac, |b, &frac| {
            b.iter(|| solve_gram(&problem, black_box(frac * lambda_max), &opts).unwrap())
        });
    }
    group.finish();
}

fn analytic(c: &mut Criterion) {
    let graph = grid_graph(4, 4).unwrap();
    let model = ModelSpec::default().build(&graph).unwrap();
    let f = default_frequency(64);
    c.bench_function("compute_constants", |b| {
        b.iter(|| compute_constants(&model, &graph, black_box(f)).unwrap())
    });
    c.bench_function("expected_finite_psd", |b| {
        b.iter(|| expected_finite_psd(&model, black_box(f), 64).unwrap())
    });
}

criterion_group!(benches, simulation, solver, analytic);
criterion_main!(benches);
