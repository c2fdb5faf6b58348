use criterion::{criterion_group, criterion_main, Criterion};
use ncstokes::assembly::{element_map, local_stiffness};
use ncstokes::{assemble_constrained, level_mesh, solve_stokes, ExactSolution, SolverConfig};

fn local(c: &mut Criterion) {
    let mesh = level_mesh(2).unwrap();
    let map = element_map(&mesh, 5).unwrap();
    c.bench_function("local stiffness 69x69", |b| {
        b.iter(|| local_stiffness(std::hint::black_box(&map)))
    });
}

fn assembly(c: &mut Criterion) {
    let mesh = level_mesh(2).unwrap();
    let f = |x| ExactSolution.forcing(x);
    let mut g = c.benchmark_group("assembly");
    g.sample_size(10);
    g.bench_function("level 2 constrained system", |b| {
        b.iter(|| assemble_constrained(&mesh, &f).unwrap())
    });
    g.finish();
}

fn solve(c: &mut Criterion) {
    let mesh = level_mesh(2).unwrap();
    let system = assemble_constrained(&mesh, &|x| ExactSolution.forcing(x)).unwrap();
    let config = SolverConfig::default();
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("level 2 Uzawa", |b| b.iter(|| solve_stokes(&system, &config).unwrap()));
    g.finish();
}

criterion_group!(benches, local, assembly, solve);
criterion_main!(benches);
