use criterion::{black_box, criterion_group, criterion_main, Criterion};

use gevrey_bench::bump_source;
use gevrey_core::coeffs::delta_table;
use gevrey_core::exactnum::derive_params;
use gevrey_core::greens::{convolve, GreensFn, OdeOperator};
use gevrey_core::quad::PanelGrid;
use gevrey_core::solver::{assemble, solve, SolverConfig};
use gevrey_core::spectral::{eigenfunction, Parity};
use gevrey_core::transform::kernel_eval;
use gevrey_core::ComplexHP;

fn exact(c: &mut Criterion) {
    c.bench_function("eigenfunction k=12 n=1", |b| b.iter(|| eigenfunction(Parity::Even, black_box(12), 1)));
    c.bench_function("delta table 10x8", |b| b.iter(|| delta_table(black_box(1), 10, 8)));
}

fn numeric(c: &mut Criterion) {
    let p = derive_params(1, 2).unwrap();
    let g = GreensFn::new(OdeOperator::for_level(&p, 0));
    let grid = PanelGrid::new(0.0, 160.0, 0.25);
    let f = bump_source(&grid);
    c.bench_function("convolve 640 panels", |b| {
        b.iter(|| convolve(&g, &grid, black_box(&f), ComplexHP::new(1.0, 0.0), false).unwrap())
    });

    let cfg = SolverConfig { ell_max: 3, ..SolverConfig::default() };
    let sol = solve(&derive_params(0, 1).unwrap(), &cfg).unwrap();
    let asm = assemble(&sol, sol.solved()).unwrap();
    let mut group = c.benchmark_group("kernel");
    group.sample_size(10);
    group.bench_function("eval at (0.3, 0.5)", |b| b.iter(|| kernel_eval(&asm, black_box(0.3), black_box(0.5))));
    group.finish();
}

criterion_group!(benches, exact, numeric);
criterion_main!(benches);
