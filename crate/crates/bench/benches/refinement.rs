use bbdoa_bench::uniform_trial;
use bbdoa_core::{estimate, EstimatorKind, EstimatorSettings};
use criterion::{criterion_group, criterion_main, Criterion};

// Refinement against a fixed grid that is as fine as the refined one.
fn refinement(c: &mut Criterion) {
    let (cfg, geom, bins) = uniform_trial(10.0, 2);
    let k = cfg.sources.count();
    let coarse = EstimatorSettings::default();
    let fine = EstimatorSettings {
        grid_step: coarse.refine.target_step,
        ..coarse.clone()
    };
    let mut group = c.benchmark_group("estimate");
    group.sample_size(10);
    group.bench_function("qspice_gnr2", |b| {
        b.iter(|| estimate(EstimatorKind::QspiceGnr2, &bins, &geom, cfg.convention, k, &coarse).unwrap())
    });
    group.bench_function("qspice_fine_grid", |b| {
        b.iter(|| estimate(EstimatorKind::Qspice, &bins, &geom, cfg.convention, k, &fine).unwrap())
    });
    for kind in [EstimatorKind::Cbf, EstimatorKind::Music] {
        group.bench_function(kind.name(), |b| {
            b.iter(|| estimate(kind, &bins, &geom, cfg.convention, k, &coarse).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, refinement);
criterion_main!(benches);
