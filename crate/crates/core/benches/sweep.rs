use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use isoblock::block::{grid_values, BlockParams};
use isoblock::inclusion::default_strategies;
use isoblock::rd::{random_profile, HeavisideRd, RdConfig};
use isoblock::semiflow::check_axioms;
use isoblock::suite::SaddleSetup;
use isoblock::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn saddle_grid_values(c: &mut Criterion) {
    let setup = SaddleSetup { grid_n: 41, ..SaddleSetup::default() }.build(BlockParams::default()).unwrap();
    let mut g = c.benchmark_group("saddle_grid_values");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| grid_values(setup.generator.as_ref(), &setup.functionals, &setup.grid, 5.0, None, 0, exec).unwrap())
        });
    }
    g.finish();
}

fn rd_bundles(c: &mut Criterion) {
    let cfg = RdConfig { n: 31, dt: 1e-2, t_end: 1.0, ..RdConfig::default() };
    let gen = HeavisideRd::new(cfg).unwrap().generator(default_strategies());
    let samples: Vec<_> = (0..8).map(|i| random_profile(&cfg, 6, 0.3, i)).collect();
    let mut g = c.benchmark_group("rd_axiom_bundles");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| check_axioms(&gen, &samples, 1.0, 0, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, saddle_grid_values, rd_bundles);
criterion_main!(benches);
