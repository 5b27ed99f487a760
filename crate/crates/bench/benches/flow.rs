use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flatflow::distance::signed_distance;
use flatflow::mms::{mms_step, Mode, StepOptions};
use flatflow::rof::{rof_solve, RofProblem};
use flatflow_bench::{ellipse, step};

fn bench_signed_distance(c: &mut Criterion) {
    let mut group = c.benchmark_group("signed_distance");
    for n in [128, 256] {
        let e = ellipse(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &e, |b, e| b.iter(|| signed_distance(e).unwrap()));
    }
    group.finish();
}

fn bench_rof_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("rof_solve");
    group.sample_size(10);
    for n in [128, 256] {
        let e = ellipse(n);
        let problem = RofProblem::new(signed_distance(&e).unwrap(), step(&e)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &problem, |b, p| {
            b.iter(|| rof_solve(p, 1e-7, 20_000).unwrap())
        });
    }
    group.finish();
}

fn bench_mms_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("mms_step");
    group.sample_size(10);
    for n in [128, 256] {
        let e = ellipse(n);
        let h = step(&e);
        group.bench_with_input(BenchmarkId::from_parameter(n), &e, |b, e| {
            b.iter(|| mms_step(e, h, std::f64::consts::PI, Mode::Constrained, &StepOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_signed_distance, bench_rof_solve, bench_mms_step);
criterion_main!(benches);
