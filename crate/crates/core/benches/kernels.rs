//! Parallel vs sequential backend on the hot kernels.
//!
//! The sequential variant runs the same code under `exec::sequential`, so
//! both columns use identical arithmetic. Without the `parallel` feature
//! the two columns coincide.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smx_core::ball::estimate_constants;
use smx_core::energy::{energy, ProblemSpec};
use smx_core::exec;
use smx_core::grid::{apply_laplacian, lp_norm, DomainGrid, ScalarField};
use smx_core::poisson::{solve_dirichlet_poisson, LinearSolveOptions};

fn field(grid: DomainGrid) -> ScalarField {
    ScalarField::from_fn(grid, |x, y, z| (x * (1.0 - x) * y * (1.0 - y) * z * (1.0 - z)).sqrt() + 0.1 * (7.0 * x).sin())
}

fn spec(grid: DomainGrid) -> ProblemSpec {
    let k = ScalarField::constant(grid, 1.0);
    let h = ScalarField::first_eigenfunction(grid);
    ProblemSpec::new(7.0, k, h, LinearSolveOptions::for_grid(grid)).unwrap()
}

fn both(c: &mut Criterion, name: &str, sizes: &[usize], mut f: impl FnMut(DomainGrid) -> Box<dyn FnMut()>) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    for &n in sizes {
        let grid = DomainGrid::new(n).unwrap();
        let mut work = f(grid);
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| b.iter(&mut work));
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| exec::sequential(&mut work))
        });
    }
    group.finish();
}

fn kernels(c: &mut Criterion) {
    both(c, "laplacian", &[32, 64], |g| {
        let u = field(g);
        Box::new(move || {
            std::hint::black_box(apply_laplacian(&u));
        })
    });
    both(c, "lp_norm", &[32, 64], |g| {
        let u = field(g);
        Box::new(move || {
            std::hint::black_box(lp_norm(&u, 3.0).unwrap());
        })
    });
    both(c, "poisson_cg", &[16, 32], |g| {
        let f = field(g);
        let opts = LinearSolveOptions::for_grid(g);
        Box::new(move || {
            std::hint::black_box(solve_dirichlet_poisson(&f, &opts).unwrap());
        })
    });
    both(c, "energy", &[16, 32], |g| {
        let (u, s) = (field(g), spec(g));
        Box::new(move || {
            std::hint::black_box(energy(&u, &s).unwrap());
        })
    });
    both(c, "estimate_constants", &[16], |g| {
        let s = spec(g);
        Box::new(move || {
            std::hint::black_box(estimate_constants(&s, 16, 1, 2.0).unwrap());
        })
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
