use bbdoa_bench::{dictionary, uniform_trial};
use bbdoa_core::{qspice_solve, SolverConfig, SolverMethod};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn solvers(c: &mut Criterion) {
    let (cfg, geom, bins) = uniform_trial(5.0, 1);
    let dict = dictionary(&geom, cfg.frequency_hz, 1.0);
    let cov = &bins[0].cov;
    let mut group = c.benchmark_group("qspice_solve");
    for (name, method) in [("newton", SolverMethod::Newton), ("mm", SolverMethod::Mm)] {
        for q in [1.0, 2.0] {
            let solver = SolverConfig {
                method,
                ..SolverConfig::with_orders(1.0, q)
            };
            group.bench_with_input(BenchmarkId::new(name, format!("q={q}")), &solver, |b, s| {
                b.iter(|| qspice_solve(cov, &dict, s).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = solvers
}
criterion_main!(benches);
