use std::f64::consts::PI;

use phasesync::nlp::MinimizeOptions;
use phasesync::pseudospectral::{solve_ensemble, CollocationProblem, EnsembleOptions};
use phasesync::roots::brent;
use phasesync::single::solve_min_power;
use phasesync::{integrate, ControlSignal, Interpolation, PhaseModel, SampledControl};
use proptest::prelude::*;

const STEPS: usize = 4000;

/// `θ(T)` and `∫u²` for the piecewise-linear input through `values` on the uniform grid.
fn run(model: PhaseModel, horizon: f64, values: &[f64]) -> (f64, f64) {
    let h = horizon / STEPS as f64;
    let times: Vec<f64> = (0..=STEPS).map(|k| k as f64 * h).collect();
    let u = ControlSignal::Sampled(SampledControl::new(times, values.to_vec(), Interpolation::Linear, None).unwrap());
    let traj = integrate(&[model], &u, horizon, &[0.0], h).unwrap();
    let energy = values.windows(2).map(|w| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0).sum();
    (traj.terminal()[0], energy)
}

/// Energy after adding `shape` and a shooting correction `c·sin(πt/T)` that restores θ(T) = 2π.
fn refeasibilized_energy(model: PhaseModel, horizon: f64, base: &[f64], shape: &[f64]) -> f64 {
    let h = horizon / STEPS as f64;
    let lift: Vec<f64> = (0..=STEPS).map(|k| (PI * k as f64 * h / horizon).sin()).collect();
    let input = |c: f64| -> Vec<f64> { (0..=STEPS).map(|k| base[k] + shape[k] + c * lift[k]).collect() };
    let c = brent(|c| run(model, horizon, &input(c)).0 - 2.0 * PI, -0.2, 0.2, 1e-14).unwrap();
    run(model, horizon, &input(c)).1
}

fn optimal_samples(model: PhaseModel, horizon: f64) -> Vec<f64> {
    let sol = solve_min_power(&model, horizon, f64::INFINITY).unwrap();
    let traj = integrate(&[model], &sol.control(), horizon, &[0.0], horizon / STEPS as f64).unwrap();
    traj.states.iter().map(|s| sol.control_at(s[0])).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn min_power_is_locally_optimal(
        amp in -1e-2f64..1e-2,
        center in 0.1f64..0.9,
        width in 0.05f64..0.3,
        stretch in prop::sample::select(vec![0.75, 1.25]),
    ) {
        let model = PhaseModel::theta(0.25).unwrap();
        let horizon = stretch * 2.0 * PI;
        let base = optimal_samples(model, horizon);
        let zero = vec![0.0; STEPS + 1];
        let reference = refeasibilized_energy(model, horizon, &base, &zero);
        let bump: Vec<f64> = (0..=STEPS)
            .map(|k| {
                let s = (k as f64 / STEPS as f64 - center) / width;
                amp * (-s * s).exp()
            })
            .collect();
        let perturbed = refeasibilized_energy(model, horizon, &base, &bump);
        prop_assert!(perturbed >= reference - 1e-6, "{perturbed} < {reference}");
    }
}

fn three_sinusoidal_problem() -> CollocationProblem {
    let models = (1..=3).map(|w| PhaseModel::sinusoidal(w as f64).unwrap()).collect();
    let targets = (1..=3).map(|k| 2.0 * PI * k as f64).collect();
    CollocationProblem::new(32, models, 2.0 * PI - 0.3, targets, 0.0, 1.0, Some(2.0)).unwrap()
}

#[test]
fn outer_violation_is_monotone_and_run_is_deterministic() {
    let p = three_sinusoidal_problem();
    let opts = EnsembleOptions {
        multistart: 2,
        seed: 11,
        ..EnsembleOptions::default()
    };
    let a = solve_ensemble(&p, &MinimizeOptions::default(), &opts).unwrap();
    assert!(a.nlp.converged);
    let v: Vec<f64> = a.nlp.trace.iter().map(|r| r.violation).collect();
    // non-increasing up to round-off once feasible
    for w in v.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-12, "{v:?}");
    }
    let b = solve_ensemble(&p, &MinimizeOptions::default(), &opts).unwrap();
    assert_eq!(a.nlp.x, b.nlp.x);
    assert_eq!(a.start_seed, b.start_seed);
    assert_eq!(a.seeds_tried, vec![11, 12]);
    assert_eq!(a.terminal_error, b.terminal_error);
}

#[test]
fn soft_terminal_penalty_approaches_hard_constraint() {
    let model = PhaseModel::theta(0.25).unwrap();
    let hard = CollocationProblem::new(24, vec![model], 4.0, vec![2.0 * PI], 0.0, 1.0, None).unwrap();
    let hard = solve_ensemble(&hard, &MinimizeOptions::default(), &EnsembleOptions::default()).unwrap();
    let mut last = f64::INFINITY;
    for w in [1.0, 10.0, 100.0] {
        let soft = CollocationProblem::new(24, vec![model], 4.0, vec![2.0 * PI], w, 1.0, None).unwrap();
        let s = solve_ensemble(&soft, &MinimizeOptions::default(), &EnsembleOptions::default()).unwrap();
        let miss = (s.phases.last().unwrap()[0] - 2.0 * PI).abs();
        assert!(miss < last, "{w} {miss}");
        assert!(s.energy <= hard.energy + 1e-9);
        last = miss;
    }
}
