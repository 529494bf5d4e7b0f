use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use singular_core::mesh::solve_spd;
use singular_core::solver::{default_schedule, solve_regularized, solve_sequence};
use singular_core::{
    build_laplacian, Grid, GridFunction, ProblemSpec, RadonMeasure, ScalarField, SingularNonlinearity,
    SolverConfig,
};

fn dirac_spec(dim: usize, cells: usize, gamma: f64) -> ProblemSpec {
    ProblemSpec::new(
        Grid::new(dim, cells, 0.0).unwrap(),
        SingularNonlinearity::pure_power(gamma).unwrap(),
        ScalarField::Constant(1.0),
        RadonMeasure::dirac(&vec![0.5; dim], 1.0),
        1024,
    )
}

fn poisson(c: &mut Criterion) {
    let mut group = c.benchmark_group("pcg_poisson");
    for (dim, cells) in [(1, 1024), (2, 64), (3, 24)] {
        let grid = Grid::new(dim, cells, 0.0).unwrap();
        let op = build_laplacian(&grid);
        let rhs = GridFunction::constant(grid, 1.0);
        group.bench_with_input(BenchmarkId::new(format!("{dim}d"), cells), &rhs, |b, rhs| {
            b.iter(|| solve_spd(&op, black_box(rhs), 1e-10).unwrap())
        });
    }
    group.finish();
}

fn picard(c: &mut Criterion) {
    let mut group = c.benchmark_group("picard_single_level");
    group.sample_size(20);
    for gamma in [0.5, 2.0] {
        let spec = dirac_spec(2, 32, gamma);
        let cfg = SolverConfig::for_dim(2);
        group.bench_with_input(BenchmarkId::new("2d_cells32", gamma), &spec, |b, spec| {
            b.iter(|| solve_regularized(black_box(spec), &cfg).unwrap())
        });
    }
    group.finish();
}

fn sequence(c: &mut Criterion) {
    let mut group = c.benchmark_group("regularized_sequence");
    group.sample_size(10);
    let spec = dirac_spec(1, 128, 1.0);
    let schedule = default_schedule();
    let cfg = SolverConfig::for_dim(1);
    group.bench_function("1d_cells128", |b| {
        b.iter(|| solve_sequence(black_box(&spec), &schedule, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, poisson, picard, sequence);
criterion_main!(benches);
