use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use heisenberg_core::exec;
use heisenberg_core::experiments::{run_inequality_suite, Experiment, ExperimentConfig};
use heisenberg_core::spaces::{ball_family, ball_stats, BallFamilySpec};
use heisenberg_core::{GroupElement, QuadratureSpec, TestFunction};

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn ball_statistics(c: &mut Criterion) {
    let f = TestFunction::bump(GroupElement::h1(0.3, -0.2, 0.1), 1.0).unwrap();
    let spec = BallFamilySpec {
        count: 256,
        ..Default::default()
    };
    let balls = ball_family(1, &spec, 1).unwrap();
    let quad = QuadratureSpec::default();
    let mut group = c.benchmark_group("ball_stats");
    group.sample_size(10);
    for (name, seq) in MODES {
        exec::set_sequential(seq);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| ball_stats(&f, 2.0, &balls, &quad).unwrap())
        });
    }
    exec::set_sequential(false);
    group.finish();
}

fn inequality_suite(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::defaults_for(Experiment::Inequalities);
    cfg.inequalities.samples = 200;
    cfg.inequalities.annulus_samples = 2000;
    let mut group = c.benchmark_group("inequalities");
    group.sample_size(10);
    for (name, seq) in MODES {
        exec::set_sequential(seq);
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_inequality_suite(&cfg).unwrap()));
    }
    exec::set_sequential(false);
    group.finish();
}

criterion_group!(benches, ball_statistics, inequality_suite);
criterion_main!(benches);
