use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sheetcap::capacity::{kernel_matrix_with, KernelSpec};
use sheetcap::montecarlo::{estimate_hit_probability, FieldKind, HitQuery, Sampling};
use sheetcap::{build_rect_mesh, Execution, SeedSpec, TimePoint};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn square(n: usize) -> sheetcap::CompactMesh {
    let lo = TimePoint::new(1.0, 1.0).unwrap();
    let hi = TimePoint::new(2.0, 2.0).unwrap();
    build_rect_mesh(lo, hi, n, n).unwrap()
}

fn hit_probability(c: &mut Criterion) {
    let mesh = square(8);
    let q = HitQuery::at_origin(1, 0.25, 2.0).unwrap();
    let mut group = c.benchmark_group("hit_probability_8x8_4096");
    group.sample_size(10);
    for exec in MODES {
        let sampling = Sampling::new(4096, SeedSpec::new(1, 0)).with_execution(exec);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &sampling, |b, s| {
            b.iter(|| estimate_hit_probability(&mesh, &q, 1, s, FieldKind::Sheet).unwrap())
        });
    }
    group.finish();
}

fn kernel_assembly(c: &mut Criterion) {
    let mesh = square(32);
    let spec = KernelSpec::for_dimension(1, 0.05).unwrap();
    let mut group = c.benchmark_group("kernel_matrix_1024");
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, e| {
            b.iter(|| kernel_matrix_with(&mesh, &spec, *e).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, hit_probability, kernel_assembly);
criterion_main!(benches);
