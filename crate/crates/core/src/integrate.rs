//! Fixed-step RK4 simulation of an ensemble under a common input, and spike detection.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::model::PhaseModel;
use crate::numfmt::sig9;

/// Default number of RK4 steps per horizon.
pub const DEFAULT_STEPS: usize = 4096;

/// Crossings closer than this below a multiple of 2π still count as spikes.
const SPIKE_SLACK: f64 = 1e-9;

/// Sampled ensemble trajectory with unwrapped phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One row per grid time, one column per neuron.
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn neurons(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// Phase history of one neuron.
    pub fn phase(&self, neuron: usize) -> Vec<f64> {
        self.states.iter().map(|row| row[neuron]).collect()
    }

    /// CSV with header `t,theta_1,...,theta_n,u`, nine significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for k in 1..=self.neurons() {
            write!(out, ",theta_{k}").unwrap();
        }
        out.push_str(",u\n");
        for ((t, row), u) in self.times.iter().zip(&self.states).zip(&self.controls) {
            out.push_str(&sig9(*t));
            for th in row {
                out.push(',');
                out.push_str(&sig9(*th));
            }
            out.push(',');
            out.push_str(&sig9(*u));
            out.push('\n');
        }
        out
    }
}

/// Builds the integration grid: `[0, T]` split at the control's breakpoints, each piece
/// divided into equal steps no longer than `step`.
pub fn time_grid(horizon: f64, step: f64, breakpoints: &[f64]) -> Vec<f64> {
    let mut knots = vec![0.0];
    knots.extend(breakpoints.iter().copied().filter(|&b| b > 0.0 && b < horizon));
    knots.push(horizon);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut grid = vec![0.0];
    for w in knots.windows(2) {
        let len = w[1] - w[0];
        let n = ((len / step).ceil() as usize).max(1);
        let h = len / n as f64;
        for i in 1..n {
            grid.push(w[0] + h * i as f64);
        }
        grid.push(w[1]);
    }
    grid
}

/// Integrates `θ̇_i = f_i(θ_i) + Z_i(θ_i)·u` for every model under the shared input `u`.
///
/// `step` is the maximum RK4 step; control breakpoints always fall on grid points.
pub fn integrate(
    models: &[PhaseModel],
    u: &ControlSignal,
    horizon: f64,
    initial: &[f64],
    step: f64,
) -> Result<Trajectory> {
    if models.len() != initial.len() {
        return Err(Error::LengthMismatch {
            expected: models.len(),
            got: initial.len(),
        });
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let times = time_grid(horizon, step, &u.breakpoints());
    let n = models.len();
    let mut states = Vec::with_capacity(times.len());
    let mut controls = Vec::with_capacity(times.len());
    let mut th = initial.to_vec();
    let rhs = |t: f64, span: (f64, f64), x: &[f64], out: &mut [f64]| {
        let v = u.eval_in_step(t, span, x);
        for ((o, m), &xi) in out.iter_mut().zip(models).zip(x) {
            *o = m.velocity(xi, v);
        }
    };
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    states.push(th.clone());
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let h = t1 - t0;
        let span = (t0, t1);
        controls.push(u.eval_in_step(t0, span, &th));
        rhs(t0, span, &th, &mut k1);
        for i in 0..n {
            tmp[i] = th[i] + 0.5 * h * k1[i];
        }
        rhs(t0 + 0.5 * h, span, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = th[i] + 0.5 * h * k2[i];
        }
        rhs(t0 + 0.5 * h, span, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = th[i] + h * k3[i];
        }
        rhs(t1, span, &tmp, &mut k4);
        for i in 0..n {
            th[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if th.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { time: t1 });
        }
        states.push(th.clone());
    }
    // last sample: value on the final step
    let last = times.len() - 1;
    let span = if last > 0 { (times[last - 1], times[last]) } else { (0.0, 0.0) };
    controls.push(u.eval_in_step(times[last], span, &th));
    Ok(Trajectory {
        times,
        states,
        controls,
    })
}

/// Per-neuron times at which the unwrapped phase crosses a positive multiple of 2π,
/// located by linear interpolation between grid points.
pub fn spike_times(traj: &Trajectory) -> Vec<Vec<f64>> {
    let two_pi = 2.0 * PI;
    (0..traj.neurons())
        .map(|k| {
            let mut spikes = Vec::new();
            for i in 1..traj.len() {
                let (a, b) = (traj.states[i - 1][k], traj.states[i][k]);
                let (ta, tb) = (traj.times[i - 1], traj.times[i]);
                let lo = ((a + SPIKE_SLACK) / two_pi).floor() as i64;
                let hi = ((b + SPIKE_SLACK) / two_pi).floor() as i64;
                for level in (lo + 1)..=hi {
                    if level < 1 {
                        continue;
                    }
                    let target = two_pi * level as f64;
                    let t = if (b - a).abs() < f64::MIN_POSITIVE {
                        tb
                    } else {
                        (ta + (target - a) / (b - a) * (tb - ta)).clamp(ta, tb)
                    };
                    spikes.push(t);
                }
            }
            spikes
        })
        .collect()
}
