//! Legendre–Gauss–Lobatto collocation of the ensemble steering problem.
//!
//! Time `t ∈ [0, T]` maps to `τ = 2t/T − 1 ∈ [−1, 1]`. The phases and the common input
//! are represented by their values at the `N + 1` LGL nodes, the dynamics are enforced
//! through the spectral differentiation matrix, and integrals use the LGL rule.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{ControlSignal, Interpolation, SampledControl};
use crate::error::{Error, Result};
use crate::integrate::{integrate, spike_times, Trajectory};
use crate::model::PhaseModel;
use crate::nlp::{minimize, MinimizeOptions, NlpProblem, NlpResult};

/// Free phase `θ(s_j)` at the rescaled node times `s_j = t_hit (τ_j + 1)/2`, where `t_hit` is the
/// first time the uncontrolled orbit from 0 reaches `target`.
fn free_orbit_guess(model: &PhaseModel, target: f64, nodes: &[f64]) -> Option<Vec<f64>> {
    const H: f64 = 1e-3;
    const MAX_STEPS: usize = 10_000_000;
    if !(target > 0.0) {
        return None;
    }
    let rk4 = |th: f64, h: f64| {
        let k1 = model.drift(th);
        let k2 = model.drift(th + 0.5 * h * k1);
        let k3 = model.drift(th + 0.5 * h * k2);
        let k4 = model.drift(th + h * k3);
        th + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let (mut t, mut th) = (0.0, 0.0);
    let mut steps = 0;
    while th < target {
        let next = rk4(th, H);
        if next <= th || steps > MAX_STEPS {
            return None;
        }
        if next >= target {
            t += H * (target - th) / (next - th);
            break;
        }
        th = next;
        t += H;
        steps += 1;
    }
    let t_hit = t;
    let mut out = Vec::with_capacity(nodes.len());
    let (mut s, mut th) = (0.0, 0.0);
    for &tau in nodes {
        let s_next = t_hit * 0.5 * (tau + 1.0);
        let pieces = ((s_next - s) / H).ceil().max(1.0) as usize;
        let h = (s_next - s) / pieces as f64;
        for _ in 0..pieces {
            th = rk4(th, h);
        }
        s = s_next;
        out.push(th);
    }
    *out.last_mut()? = target;
    Some(out)
}

/// `(L_N(x), L'_N(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // L'_N(±1) = (±1)^{N+1} N(N+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LglGrid {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major `(N+1) × (N+1)` differentiation matrix.
    pub diff: DMatrix<f64>,
    legendre_at_nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl LglGrid {
    /// Nodes `{−1, 1} ∪ {L'_N = 0}` by Newton's method from Chebyshev–Lobatto guesses.
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::Domain(format!("LGL order must be >= 2, got {order}")));
        }
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n + 1];
        nodes[0] = -1.0;
        nodes[n] = 1.0;
        // solve the lower half and mirror, which keeps the grid exactly symmetric
        for j in 1..=n / 2 {
            let mut x = -(std::f64::consts::PI * j as f64 / nf).cos();
            let mut converged = false;
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let d2p = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
                let dx = dp / d2p;
                x -= dx;
                if dx.abs() < 1e-15 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numeric(format!("LGL node {j} of order {n} did not converge")));
            }
            nodes[j] = x;
            nodes[n - j] = -x;
        }
        if n.is_multiple_of(2) {
            nodes[n / 2] = 0.0;
        }
        let ln: Vec<f64> = nodes.iter().map(|&x| legendre(n, x).0).collect();
        let weights: Vec<f64> = ln.iter().map(|l| 2.0 / (nf * (nf + 1.0) * l * l)).collect();
        let mut diff = DMatrix::zeros(n + 1, n + 1);
        for j in 0..=n {
            for k in 0..=n {
                if j != k {
                    diff[(j, k)] = ln[j] / (ln[k] * (nodes[j] - nodes[k]));
                }
            }
        }
        // negative-sum diagonal: constants are differentiated to zero up to round-off, which
        // the closed-form corners ∓N(N+1)/4 and zero interior diagonal only give to ~1e-11
        for j in 0..=n {
            let off: f64 = (0..=n).filter(|&k| k != j).map(|k| diff[(j, k)]).sum();
            diff[(j, j)] = -off;
        }
        // the node polynomial is (t² − 1)L'_N, so barycentric weights are ∝ 1/L_N(t_j)
        let bary: Vec<f64> = ln.iter().map(|l| 1.0 / l).collect();
        Ok(Self {
            order,
            nodes,
            weights,
            diff,
            legendre_at_nodes: ln,
            bary,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `L_N(t_j)`.
    pub fn legendre_at_nodes(&self) -> &[f64] {
        &self.legendre_at_nodes
    }

    /// `Σ w_j f_j`.
    pub fn quadrature(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: samples.len(),
            });
        }
        Ok(self.weights.iter().zip(samples).map(|(w, f)| w * f).sum())
    }

    /// Barycentric Lagrange interpolant of nodal `values` at `t ∈ [−1, 1]`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        crate::control::barycentric_eval(&self.nodes, &self.bary, values, t)
    }

    /// Applies `D` to nodal samples.
    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|j| (0..self.len()).map(|k| self.diff[(j, k)] * values[k]).sum())
            .collect()
    }
}

/// Transcribed ensemble steering problem.
///
/// Decision vector: `Θ̄_{jk}` at index `j·n + k` for node `j`, neuron `k`, followed by
/// `ū_j` at `(N+1)·n + j`. Cost `w_term‖Θ_d − Θ̄_N‖² + w_energy (T/2) Σ w_j ū_j²`; with
/// `w_term = 0` the terminal state is a hard constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationProblem {
    pub grid: LglGrid,
    pub models: Vec<PhaseModel>,
    pub horizon: f64,
    pub target: Vec<f64>,
    pub w_term: f64,
    pub w_energy: f64,
    pub bound: Option<f64>,
}

impl CollocationProblem {
    pub fn new(
        order: usize,
        models: Vec<PhaseModel>,
        horizon: f64,
        target: Vec<f64>,
        w_term: f64,
        w_energy: f64,
        bound: Option<f64>,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Domain("ensemble needs at least one neuron".into()));
        }
        if target.len() != models.len() {
            return Err(Error::LengthMismatch {
                expected: models.len(),
                got: target.len(),
            });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if !(w_term >= 0.0 && w_energy >= 0.0) || w_term + w_energy == 0.0 {
            return Err(Error::Domain("cost weights must be non-negative and not both zero".into()));
        }
        if let Some(a) = bound {
            if !(a > 0.0) {
                return Err(Error::Domain(format!("amplitude bound must be positive, got {a}")));
            }
        }
        Ok(Self {
            grid: LglGrid::new(order)?,
            models,
            horizon,
            target,
            w_term,
            w_energy,
            bound,
        })
    }

    pub fn neurons(&self) -> usize {
        self.models.len()
    }

    pub fn hard_terminal(&self) -> bool {
        self.w_term == 0.0
    }

    fn state_len(&self) -> usize {
        self.grid.len() * self.neurons()
    }

    /// Zero control with each neuron on its free orbit, time-rescaled so it reaches its target at
    /// `T`. Falls back to a linear ramp for a neuron whose free orbit does not reach the target.
    pub fn initial_guess(&self) -> Vec<f64> {
        let n = self.neurons();
        let mut x = vec![0.0; self.dim()];
        for k in 0..n {
            let column = free_orbit_guess(&self.models[k], self.target[k], &self.grid.nodes);
            for (j, &t) in self.grid.nodes.iter().enumerate() {
                x[j * n + k] = match &column {
                    Some(c) => c[j],
                    None => self.target[k] * 0.5 * (t + 1.0),
                };
            }
        }
        x
    }

    /// [`Self::initial_guess`] plus seeded random perturbations of the interior phases and the control.
    pub fn perturbed_guess(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.neurons();
        let mut x = self.initial_guess();
        let last = self.grid.len() - 1;
        for j in 1..last {
            for k in 0..n {
                x[j * n + k] += 0.1 * self.target[k].abs().max(1.0) * rng.random_range(-1.0..1.0);
            }
        }
        let amp = self.bound.unwrap_or(1.0);
        for j in 0..self.grid.len() {
            x[self.state_len() + j] = 0.5 * amp * rng.random_range(-1.0..1.0);
        }
        x
    }

    /// Nodal phases (`[node][neuron]`) and controls.
    pub fn unpack(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.neurons();
        let phases = (0..self.grid.len()).map(|j| x[j * n..(j + 1) * n].to_vec()).collect();
        (phases, x[self.state_len()..].to_vec())
    }

    /// Physical times of the nodes.
    pub fn node_times(&self) -> Vec<f64> {
        self.grid.nodes.iter().map(|t| 0.5 * (t + 1.0) * self.horizon).collect()
    }
}

impl NlpProblem for CollocationProblem {
    fn dim(&self) -> usize {
        self.grid.len() * (self.neurons() + 1)
    }

    fn num_constraints(&self) -> usize {
        let n = self.neurons();
        self.state_len() + n + if self.hard_terminal() { n } else { 0 }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let n = self.neurons();
        let last = self.grid.len() - 1;
        let term: f64 = (0..n).map(|k| (self.target[k] - x[last * n + k]).powi(2)).sum();
        let u = &x[self.state_len()..];
        let energy: f64 = self.grid.weights.iter().zip(u).map(|(w, u)| w * u * u).sum();
        self.w_term * term + self.w_energy * 0.5 * self.horizon * energy
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.neurons();
        let last = self.grid.len() - 1;
        let m = self.state_len();
        let mut g = vec![0.0; x.len()];
        for k in 0..n {
            g[last * n + k] = -2.0 * self.w_term * (self.target[k] - x[last * n + k]);
        }
        for j in 0..self.grid.len() {
            g[m + j] = self.w_energy * self.horizon * self.grid.weights[j] * x[m + j];
        }
        g
    }

    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        let n = self.neurons();
        let np = self.grid.len();
        let m = self.state_len();
        let half = 0.5 * self.horizon;
        let mut c = Vec::with_capacity(self.num_constraints());
        for j in 0..np {
            let u = x[m + j];
            for (k, model) in self.models.iter().enumerate() {
                let d: f64 = (0..np).map(|l| self.grid.diff[(j, l)] * x[l * n + k]).sum();
                let th = x[j * n + k];
                c.push(d - half * (model.drift(th) + u * model.prc(th)));
            }
        }
        c.extend_from_slice(&x[..n]);
        if self.hard_terminal() {
            c.extend((0..n).map(|k| x[(np - 1) * n + k] - self.target[k]));
        }
        c
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.neurons();
        let np = self.grid.len();
        let m = self.state_len();
        let half = 0.5 * self.horizon;
        let mut jac = DMatrix::zeros(self.num_constraints(), x.len());
        for j in 0..np {
            let u = x[m + j];
            for (k, model) in self.models.iter().enumerate() {
                let row = j * n + k;
                for l in 0..np {
                    jac[(row, l * n + k)] = self.grid.diff[(j, l)];
                }
                let th = x[row];
                jac[(row, row)] -= half * (model.drift_deriv(th) + u * model.prc_deriv(th));
                jac[(row, m + j)] = -half * model.prc(th);
            }
        }
        for k in 0..n {
            jac[(m + k, k)] = 1.0;
        }
        if self.hard_terminal() {
            for k in 0..n {
                jac[(m + n + k, (np - 1) * n + k)] = 1.0;
            }
        }
        jac
    }

    fn lagrangian_hessian(&self, x: &[f64], sigma: f64, y: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.neurons();
        let np = self.grid.len();
        let m = self.state_len();
        let half = 0.5 * self.horizon;
        let mut h = DMatrix::zeros(x.len(), x.len());
        for k in 0..n {
            let i = (np - 1) * n + k;
            h[(i, i)] += sigma * 2.0 * self.w_term;
        }
        for j in 0..np {
            h[(m + j, m + j)] += sigma * self.w_energy * self.horizon * self.grid.weights[j];
            let u = x[m + j];
            for (k, model) in self.models.iter().enumerate() {
                let i = j * n + k;
                let th = x[i];
                let w = y[i];
                h[(i, i)] -= w * half * (model.drift_deriv2(th) + u * model.prc_deriv2(th));
                let cross = -w * half * model.prc_deriv(th);
                h[(i, m + j)] += cross;
                h[(m + j, i)] += cross;
            }
        }
        Some(h)
    }

    fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let a = self.bound?;
        let m = self.state_len();
        let d = self.dim();
        let lo = (0..d).map(|i| if i < m { f64::NEG_INFINITY } else { -a }).collect();
        let hi = (0..d).map(|i| if i < m { f64::INFINITY } else { a }).collect();
        Some((lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    /// Extra randomly perturbed starts besides the free-orbit start.
    pub multistart: usize,
    pub seed: u64,
    /// RK4 steps for the re-integration check.
    pub oracle_steps: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            multistart: 0,
            seed: 0,
            oracle_steps: 8192,
        }
    }
}

/// Solved transcription plus its re-integration under the interpolated control.
#[derive(Debug, Clone)]
pub struct EnsembleSolution {
    pub nlp: NlpResult,
    pub node_times: Vec<f64>,
    pub phases: Vec<Vec<f64>>,
    pub controls: Vec<f64>,
    /// `None` for the free-orbit start, the seed otherwise.
    pub start_seed: Option<u64>,
    pub seeds_tried: Vec<u64>,
    pub control: ControlSignal,
    pub trajectory: Trajectory,
    pub spikes: Vec<Vec<f64>>,
    /// Oracle time at which each neuron first reaches its target; the oracle is continued
    /// past `T` for 10% of the horizon with the final control value held.
    pub target_times: Vec<Option<f64>>,
    pub terminal_error: Vec<f64>,
    pub energy: f64,
}

/// Solves the transcription from the free-orbit start and `multistart` seeded starts (in parallel)
/// and keeps the best converged one, re-integrating its control as a check.
pub fn solve_ensemble(problem: &CollocationProblem, nlp: &MinimizeOptions, opts: &EnsembleOptions) -> Result<EnsembleSolution> {
    let seeds: Vec<u64> = (0..opts.multistart as u64).map(|i| opts.seed.wrapping_add(i)).collect();
    let starts: Vec<(Option<u64>, Vec<f64>)> = std::iter::once((None, problem.initial_guess()))
        .chain(seeds.iter().map(|&s| (Some(s), problem.perturbed_guess(s))))
        .collect();
    let runs: Vec<(Option<u64>, Result<NlpResult>)> = starts
        .into_par_iter()
        .map(|(seed, x0)| (seed, minimize(problem, &x0, nlp)))
        .collect();
    let mut best: Option<(Option<u64>, NlpResult)> = None;
    let mut first_err = None;
    for (seed, r) in runs {
        match r {
            Ok(r) => {
                let better = best.as_ref().is_none_or(|(_, b)| {
                    (!b.converged && r.converged)
                        || (b.converged == r.converged
                            && (r.objective, r.constraint_violation) < (b.objective, b.constraint_violation))
                });
                if better {
                    best = Some((seed, r));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let (start_seed, result) = match (best, first_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least the free-orbit start runs"),
    };

    let (phases, controls) = problem.unpack(&result.x);
    let node_times = problem.node_times();
    let control = ControlSignal::Sampled(SampledControl::new(
        node_times.clone(),
        controls.clone(),
        Interpolation::Barycentric,
        problem.bound,
    )?);
    let n = problem.neurons();
    let trajectory = integrate(
        &problem.models,
        &control,
        problem.horizon,
        &vec![0.0; n],
        problem.horizon / opts.oracle_steps.max(1) as f64,
    )?;
    let spikes = spike_times(&trajectory);
    let end = trajectory.terminal();
    let terminal_error = (0..n).map(|k| end[k] - problem.target[k]).collect();
    let step = problem.horizon / opts.oracle_steps.max(1) as f64;
    let u_end = control.eval(problem.horizon, end);
    let tail = integrate(&problem.models, &ControlSignal::Constant(u_end), 0.1 * problem.horizon, end, step)?;
    let target_times = (0..n)
        .map(|k| {
            let rows = trajectory
                .times
                .iter()
                .zip(&trajectory.states)
                .map(|(&t, row)| (t, row[k]))
                .chain(tail.times.iter().zip(&tail.states).skip(1).map(|(&t, row)| (problem.horizon + t, row[k])));
            first_crossing(rows, problem.target[k])
        })
        .collect();
    let energy = 0.5 * problem.horizon * problem.grid.quadrature(&controls.iter().map(|u| u * u).collect::<Vec<_>>())?;
    Ok(EnsembleSolution {
        nlp: result,
        node_times,
        phases,
        controls,
        start_seed,
        seeds_tried: seeds,
        control,
        trajectory,
        spikes,
        target_times,
        terminal_error,
        energy,
    })
}

/// First time a sampled monotone-ish path reaches `level`, by linear interpolation.
fn first_crossing(samples: impl Iterator<Item = (f64, f64)>, level: f64) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for (t, v) in samples {
        if v >= level {
            return Some(match prev {
                Some((tp, vp)) if v > vp => tp + (level - vp) / (v - vp) * (t - tp),
                _ => t,
            });
        }
        prev = Some((t, v));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::free_evolution_theta;
    use crate::nlp::{gradient_check, jacobian_check};
    use std::f64::consts::PI;

    #[test]
    fn three_point_rule() {
        let g = LglGrid::new(2).unwrap();
        for (a, b) in g.nodes.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in g.weights.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_matches_closed_form() {
        for n in [4, 16, 40, 64] {
            let g = LglGrid::new(n).unwrap();
            let corner = (n * (n + 1)) as f64 / 4.0;
            assert!((g.diff[(0, 0)] + corner).abs() < 1e-9 * corner, "{n}");
            assert!((g.diff[(n, n)] - corner).abs() < 1e-9 * corner, "{n}");
            for j in 1..n {
                assert!(g.diff[(j, j)].abs() < 1e-9 * corner, "{n} {j}");
            }
        }
        let g = LglGrid::new(2).unwrap();
        let d3 = [[-1.5, 2.0, -0.5], [-0.5, 0.0, 0.5], [0.5, -2.0, 1.5]];
        for (j, row) in d3.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                assert!((g.diff[(j, k)] - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn order_four_interior_nodes() {
        // L'_4 ∝ 7t³ − 3t
        let g = LglGrid::new(4).unwrap();
        let r = (3.0f64 / 7.0).sqrt();
        for (a, b) in g.nodes.iter().zip([-1.0, -r, 0.0, r, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        for n in [2, 3, 7, 16, 33, 64, 128, 512] {
            let g = LglGrid::new(n).unwrap();
            assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13, "N = {n}");
            for j in 0..=n {
                assert_eq!(g.nodes[j], -g.nodes[n - j]);
                assert!((g.weights[j] - g.weights[n - j]).abs() < 1e-15);
            }
            assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn quadrature_examples() {
        let g = LglGrid::new(4).unwrap();
        let t2: Vec<f64> = g.nodes.iter().map(|t| t * t).collect();
        assert!((g.quadrature(&t2).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        let g = LglGrid::new(16).unwrap();
        let c: Vec<f64> = g.nodes.iter().map(|t| t.cos()).collect();
        assert!((g.quadrature(&c).unwrap() - 2.0 * 1f64.sin()).abs() < 1e-12);
        assert!(g.quadrature(&[1.0]).is_err());
    }

    #[test]
    fn interpolation_reproduces_degree_n() {
        let g = LglGrid::new(12).unwrap();
        let p = |t: f64| (0..=12).map(|k| (k as f64 * 0.3 - 1.0) * t.powi(k)).sum::<f64>();
        let vals: Vec<f64> = g.nodes.iter().map(|&t| p(t)).collect();
        for (j, &t) in g.nodes.iter().enumerate() {
            assert_eq!(g.interpolate(&vals, t), vals[j]);
        }
        for k in 0..=100 {
            let t = -1.0 + 0.02 * k as f64;
            assert!((g.interpolate(&vals, t) - p(t)).abs() < 1e-12);
        }
    }

    fn free_theta_residual(order: usize) -> f64 {
        let model = PhaseModel::theta(0.25).unwrap();
        let horizon = 2.0 * PI;
        let p = CollocationProblem::new(order, vec![model], horizon, vec![2.0 * PI], 0.0, 1.0, None).unwrap();
        let mut x = vec![0.0; p.dim()];
        for (j, t) in p.node_times().iter().enumerate() {
            x[j] = free_evolution_theta(0.25, *t, 0.0).unwrap();
        }
        p.constraints(&x).iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    #[test]
    fn free_solution_residual_decays_spectrally() {
        // the free solution has poles at τ = ±0.35i, so the rate is about 1.41^(−N)
        let rs = [8, 16, 24, 32, 40].map(free_theta_residual);
        assert!(rs.windows(2).all(|w| w[1] < 0.1 * w[0]), "{rs:?}");
        assert!(rs[2] < 1e-4 && rs[4] < 1e-8, "{rs:?}");
    }

    #[test]
    fn linear_sniper_solution_is_exact() {
        let model = PhaseModel::sniper(1.5).unwrap();
        let horizon = 2.0 * PI / 1.5;
        let p = CollocationProblem::new(10, vec![model], horizon, vec![2.0 * PI], 1.0, 0.0, None).unwrap();
        let mut x = vec![0.0; p.dim()];
        for (j, t) in p.node_times().iter().enumerate() {
            x[j] = 1.5 * t;
        }
        assert!(p.constraints(&x).iter().all(|c| c.abs() < 1e-12));
        assert!(p.objective(&x).abs() < 1e-20);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let models: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&w| PhaseModel::sinusoidal(w).unwrap()).collect();
        let p = CollocationProblem::new(8, models, 5.0, vec![2.0 * PI, 4.0 * PI, 6.0 * PI], 0.7, 1.0, Some(2.0)).unwrap();
        let x = p.perturbed_guess(3);
        assert!(gradient_check(&p, &x) < 1e-5);
        assert!(jacobian_check(&p, &x) < 1e-5);
        let models: Vec<_> = [0.3, 0.9].iter().map(|&i| PhaseModel::theta(i).unwrap()).collect();
        let p = CollocationProblem::new(8, models, 5.0, vec![2.0 * PI, 4.0 * PI], 0.0, 1.0, None).unwrap();
        let x = p.perturbed_guess(4);
        assert!(gradient_check(&p, &x) < 1e-5);
        assert!(jacobian_check(&p, &x) < 1e-5);
    }

    #[test]
    fn hessian_matches_jacobian_differences() {
        let models: Vec<_> = [0.3, 0.9].iter().map(|&i| PhaseModel::theta(i).unwrap()).collect();
        let p = CollocationProblem::new(6, models, 5.0, vec![2.0 * PI, 4.0 * PI], 0.5, 1.0, None).unwrap();
        let x = p.perturbed_guess(9);
        let y: Vec<f64> = (0..p.num_constraints()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let h = p.lagrangian_hessian(&x, 1.3, &y).unwrap();
        let lag_grad = |x: &[f64]| {
            let g = p.gradient(x);
            let jt = p.jacobian(x).transpose() * nalgebra::DVector::from_column_slice(&y);
            g.iter().zip(jt.iter()).map(|(a, b)| 1.3 * a + b).collect::<Vec<f64>>()
        };
        let mut xp = x.clone();
        for i in 0..x.len() {
            let step = 1e-6;
            xp[i] = x[i] + step;
            let gp = lag_grad(&xp);
            xp[i] = x[i] - step;
            let gm = lag_grad(&xp);
            xp[i] = x[i];
            for r in 0..x.len() {
                let fd = (gp[r] - gm[r]) / (2.0 * step);
                assert!((fd - h[(r, i)]).abs() < 1e-5 * h.amax().max(1.0), "({r},{i})");
            }
        }
    }

    #[test]
    fn decision_vector_layout() {
        let models: Vec<_> = (1..=5).map(|w| PhaseModel::sinusoidal(w as f64).unwrap()).collect();
        let targets = (1..=5).map(|k| 2.0 * PI * k as f64).collect();
        let p = CollocationProblem::new(20, models, 2.0 * PI - 0.5, targets, 0.0, 1.0, Some(2.5)).unwrap();
        assert_eq!(p.dim(), 21 * 6);
        assert_eq!(p.num_constraints(), 21 * 5 + 10);
        let (lo, hi) = p.bounds().unwrap();
        assert!(lo[..105].iter().all(|v| v.is_infinite()) && hi[105..].iter().all(|&v| v == 2.5));
    }

    #[test]
    fn seeded_guesses_are_reproducible() {
        let p = CollocationProblem::new(6, vec![PhaseModel::theta(0.3).unwrap()], 4.0, vec![2.0 * PI], 0.0, 1.0, Some(1.0)).unwrap();
        assert_eq!(p.perturbed_guess(7), p.perturbed_guess(7));
        assert_ne!(p.perturbed_guess(7), p.perturbed_guess(8));
        let (_, u) = p.unpack(&p.perturbed_guess(7));
        assert!(u.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn one_neuron_energy_close_to_analytic() {
        let model = PhaseModel::theta(0.25).unwrap();
        let p = CollocationProblem::new(30, vec![model], 4.0, vec![2.0 * PI], 0.0, 1.0, None).unwrap();
        let sol = solve_ensemble(&p, &MinimizeOptions::default(), &EnsembleOptions::default()).unwrap();
        assert!(sol.nlp.converged);
        let exact = crate::single::solve_min_power(&model, 4.0, f64::INFINITY).unwrap().energy;
        assert!((sol.nlp.objective - exact).abs() < 0.02 * exact, "{} vs {exact}", sol.nlp.objective);
        assert!(sol.terminal_error[0].abs() < 1e-4);
    }
}
