use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gamecert::corpus;
use gamecert::hierarchy::{certify, CertKind, CertOptions};
use gamecert::projector::{self, ProjectionConstraints, ProjectionSpec};
use gamecert::sdp::to_sdpa_string;
use gamecert::sos::compile;

fn certification(c: &mut Criterion) {
    let opts = CertOptions::default();
    let driver = corpus::driver_game();
    let fig1 = corpus::fig1_game();
    let mut g = c.benchmark_group("certify");
    g.sample_size(20);
    g.bench_function("driver_monotone_l2", |b| {
        b.iter(|| certify(black_box(&driver), CertKind::Monotone, 2, &opts).unwrap())
    });
    g.bench_function("driver_concave_l2", |b| {
        b.iter(|| certify(black_box(&driver), CertKind::Concave, 2, &opts).unwrap())
    });
    g.bench_function("fig1_monotone_l4", |b| {
        b.iter(|| certify(black_box(&fig1), CertKind::Monotone, 4, &opts).unwrap())
    });
    g.finish();
}

fn projection(c: &mut Criterion) {
    let opts = CertOptions::default();
    let spec = ProjectionSpec {
        reference: corpus::fig3_game(),
        level: 6,
        kind: CertKind::Monotone,
        constraints: ProjectionConstraints {
            zero_sum: true,
            preserve_support: true,
            frozen: Vec::new(),
        },
    };
    let mut g = c.benchmark_group("project");
    g.sample_size(10);
    g.bench_function("fig3_l6", |b| {
        b.iter(|| projector::project(black_box(&spec), &opts).unwrap())
    });
    g.finish();
}

fn export(c: &mut Criterion) {
    let spec = ProjectionSpec {
        reference: corpus::deg8_game(),
        level: 8,
        kind: CertKind::Monotone,
        constraints: ProjectionConstraints {
            zero_sum: false,
            preserve_support: true,
            frozen: Vec::new(),
        },
    };
    let problem = projector::projection_problem(&spec).unwrap();
    let compiled = compile(&problem).unwrap();
    let mut g = c.benchmark_group("export");
    g.sample_size(10);
    g.bench_function("deg8_compile_l8", |b| {
        b.iter(|| compile(black_box(&problem)).unwrap())
    });
    g.bench_function("deg8_sdpa_l8", |b| {
        b.iter(|| to_sdpa_string(black_box(&compiled.sdp)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, certification, projection, export);
criterion_main!(benches);
