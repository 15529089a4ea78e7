//! Sequential versus rayon-parallel ensembles on the two studies that
//! dominate run time.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use svi_core::analysis::{estimate_strong_order, temperature_study, ConvergenceOptions, TemperatureOptions};
use svi_core::ensemble::Execution;
use svi_core::integrators::{Method, StepperConfig};
use svi_core::systems::{make_ballistic_analog, make_oscillator, BallisticParams, PhaseState, Vector};

fn convergence(c: &mut Criterion) {
    let sys = make_oscillator(1.0, 1.0, 0.5).unwrap();
    let s0 = PhaseState::from_momentum(&sys, Vector::from_element(1, 1.0), Vector::zeros(1));
    let base = StepperConfig::new(1.0).unwrap();
    let mut group = c.benchmark_group("convergence_oscillator_m128");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let opts = ConvergenceOptions {
            paths: 128,
            execution: exec,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(exec.name()), &opts, |b, opts| {
            b.iter(|| estimate_strong_order(&sys, Method::Svi, &s0, (0.0, 1.0), opts, &base).unwrap())
        });
    }
    group.finish();
}

fn temperature(c: &mut Criterion) {
    let sys = make_ballistic_analog(&BallisticParams::default()).unwrap();
    let mut group = c.benchmark_group("temperature_ballistic_m64_t20");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let opts = TemperatureOptions {
            horizon: 20.0,
            paths: 64,
            execution: exec,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(exec.name()), &opts, |b, opts| {
            b.iter(|| temperature_study(&sys, &[Method::Svi, Method::Eem, Method::Iem], opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, convergence, temperature);
criterion_main!(benches);
