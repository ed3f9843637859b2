use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use phasesync::nlp::MinimizeOptions;
use phasesync::pseudospectral::{solve_ensemble, CollocationProblem, EnsembleOptions, LglGrid};
use phasesync::single::solve_min_power;
use phasesync::two_neuron::{synthesize, SynthesisOptions};
use phasesync::{integrate, ControlSignal, ModelKind, PhaseModel};

fn oracle(c: &mut Criterion) {
    let models: Vec<PhaseModel> = (1..=5).map(|w| PhaseModel::from_omega(ModelKind::Theta, w as f64, None).unwrap()).collect();
    c.bench_function("rk4 5 theta neurons, 8192 steps", |b| {
        b.iter(|| integrate(black_box(&models), &ControlSignal::Constant(0.3), 2.0 * PI, &[0.0; 5], 2.0 * PI / 8192.0).unwrap())
    });
}

fn grids(c: &mut Criterion) {
    c.bench_function("lgl grid N=100", |b| b.iter(|| LglGrid::new(black_box(100)).unwrap()));
}

fn single(c: &mut Criterion) {
    let m = PhaseModel::theta(0.25).unwrap();
    c.bench_function("min-power single neuron, saturated", |b| b.iter(|| solve_min_power(&m, black_box(3.0), 1.0).unwrap()));
}

fn two_neuron(c: &mut Criterion) {
    let opts = SynthesisOptions {
        first_switch_grid: 200,
        ..SynthesisOptions::default()
    };
    let mut g = c.benchmark_group("two-neuron");
    g.sample_size(10);
    g.bench_function("bang-bang synthesis, grid 200", |b| b.iter(|| synthesize([0.3, 0.9], 0.5, [1, 2], &opts).unwrap()));
    g.finish();
}

fn ensemble(c: &mut Criterion) {
    let models: Vec<PhaseModel> = (1..=5).map(|w| PhaseModel::from_omega(ModelKind::Sinusoidal, w as f64, None).unwrap()).collect();
    let targets: Vec<f64> = (1..=5).map(|k| 2.0 * PI * k as f64).collect();
    let p = CollocationProblem::new(60, models, 2.0 * PI - 0.5, targets, 0.0, 1.0, Some(2.5)).unwrap();
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    g.bench_function("sinusoidal N=60", |b| {
        b.iter(|| solve_ensemble(&p, &MinimizeOptions::default(), &EnsembleOptions::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, oracle, grids, single, two_neuron, ensemble);
criterion_main!(benches);
