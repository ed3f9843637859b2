//! Time-optimal bang-bang spiking of two Theta neurons.
//!
//! Along an extremal the control is `±M`, giving the fields `X = f − MZ` and
//! `Y = f + MZ`. Between consecutive switching points `p` and `q = e^{τF}(p)` the
//! pulled-back control field `e^{τ ad_F} Z` must stay parallel to `Z(p)`, which gives a
//! scalar equation in `τ`. Which roots are admissible follows from the sign of `k₁` in
//! `[f, Z] = k₁ f + k₂ Z`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::control::{ControlSignal, Field, SwitchingSchedule};
use crate::error::{Error, Result};
use crate::integrate::{integrate, Trajectory};
use crate::model::PhaseModel;
use crate::roots::{brent, scan_roots};

#[inline]
fn one_minus_cos(theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    2.0 * s * s
}

/// `sin(x√κ)/√κ`, continued to `sinh(x√−κ)/√−κ` for `κ < 0` and to `x` at `κ = 0`.
fn sin_over_root(kappa: f64, x: f64) -> f64 {
    let r = kappa.abs().sqrt();
    let y = x * r;
    if y.abs() < 1e-4 {
        let s = kappa * x * x;
        return x * (1.0 - s / 6.0 + s * s / 120.0);
    }
    if kappa > 0.0 {
        y.sin() / r
    } else {
        y.sinh() / r
    }
}

/// Two Theta neurons driven by a common bang-bang input of amplitude `bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPair {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub bound: f64,
}

/// Roots of the inter-switching equation from one switching point.
#[derive(Debug, Clone, PartialEq)]
pub struct InterswitchRoots {
    pub roots: Vec<f64>,
    /// The equation holds identically (for example `Z(p) = 0`, or identical neurons in
    /// the same phase), so it carries no information.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    XtoY,
    YtoX,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchClassification {
    pub k1: f64,
    pub k2: f64,
    pub direction: Direction,
}

impl ThetaPair {
    pub fn new(currents: [f64; 2], bound: f64) -> Result<Self> {
        for &i in &currents {
            if !(i > 0.0) || !i.is_finite() {
                return Err(Error::Domain(format!("baseline currents must be positive, got {i}")));
            }
        }
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::Domain(format!("bound must be finite and >= 0, got {bound}")));
        }
        Ok(Self {
            alpha: [1.0 + currents[0], 1.0 + currents[1]],
            beta: [1.0 - currents[0], 1.0 - currents[1]],
            bound,
        })
    }

    pub fn models(&self) -> [PhaseModel; 2] {
        // constructed from validated currents
        [0, 1].map(|i| PhaseModel::theta(0.5 * (self.alpha[i] - self.beta[i])).expect("valid current"))
    }

    /// Phase velocity of neuron `i` on `field`.
    #[inline]
    pub fn velocity(&self, i: usize, theta: f64, field: Field) -> f64 {
        let u = field.sign() * self.bound;
        self.alpha[i] + self.beta[i] * theta.cos() + one_minus_cos(theta) * u
    }

    fn rk4_step(&self, p: [f64; 2], field: Field, h: f64) -> [f64; 2] {
        let v = |q: [f64; 2]| [self.velocity(0, q[0], field), self.velocity(1, q[1], field)];
        let k1 = v(p);
        let k2 = v([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]]);
        let k3 = v([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]]);
        let k4 = v([p[0] + h * k3[0], p[1] + h * k3[1]]);
        [0, 1].map(|i| p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }

    /// `e^{tF}(p)` by fixed-step RK4 with steps no longer than `step`.
    pub fn flow(&self, p: [f64; 2], field: Field, t: f64, step: f64) -> [f64; 2] {
        if t <= 0.0 {
            return p;
        }
        let n = (t / step).ceil().max(1.0) as usize;
        let h = t / n as f64;
        (0..n).fold(p, |q, _| self.rk4_step(q, field, h))
    }

    /// Flows until `θ₁` reaches `level` or `t_max` elapses. Returns the hitting time and
    /// state, located inside the last step by root-finding on the RK4 step length.
    pub fn flow_until(&self, p: [f64; 2], field: Field, t_max: f64, level: f64, step: f64) -> Option<(f64, [f64; 2])> {
        if p[0] >= level {
            return Some((0.0, p));
        }
        let n = (t_max / step).ceil().max(1.0) as usize;
        let h = t_max / n as f64;
        let mut q = p;
        for k in 0..n {
            let next = self.rk4_step(q, field, h);
            if next[0] >= level {
                let s = brent(|s| self.rk4_step(q, field, s)[0] - level, 0.0, h, 1e-16).ok()?;
                return Some((k as f64 * h + s, self.rk4_step(q, field, s)));
            }
            q = next;
        }
        None
    }

    /// Component `i` of `e^{τ ad_F} Z` at `p`.
    ///
    /// With `P = α + sM`, `Q = β − sM` (`s = ±1` for `Y`/`X`) and `κ = α − 1 + sM`,
    /// `E(τ) = (1 − cos θ) + (Q + P cos θ) S(τ)² + sin θ · 2 S(τ) C(τ)`, where
    /// `S = sin(τ√κ)/√κ` and `C = cos(τ√κ)`. This equals the trigonometric closed form
    /// for `κ > 0` and continues it to `κ ≤ 0`.
    pub fn transported_prc(&self, i: usize, theta: f64, field: Field, tau: f64) -> f64 {
        let s = field.sign() * self.bound;
        let p = self.alpha[i] + s;
        let q = self.beta[i] - s;
        let kappa = self.alpha[i] - 1.0 + s;
        let sn = sin_over_root(kappa, tau);
        let s2 = sin_over_root(kappa, 2.0 * tau);
        one_minus_cos(theta) + (q + p * theta.cos()) * sn * sn + theta.sin() * s2
    }

    /// `Z₂(p)·E₁(τ) − Z₁(p)·E₂(τ)`; zero at the next switching point.
    pub fn interswitch_residual(&self, p: [f64; 2], field: Field, tau: f64) -> f64 {
        one_minus_cos(p[1]) * self.transported_prc(0, p[0], field, tau)
            - one_minus_cos(p[0]) * self.transported_prc(1, p[1], field, tau)
    }

    /// All roots of the inter-switching equation in `(0, tau_max]`.
    pub fn interswitch_times(&self, p: [f64; 2], field: Field, tau_max: f64, points: usize) -> InterswitchRoots {
        let z = [one_minus_cos(p[0]), one_minus_cos(p[1])];
        let same = (self.alpha[0] - self.alpha[1]).abs() < 1e-15 && (p[0] - p[1]).abs() < 1e-15;
        if (z[0] < 1e-15 && z[1] < 1e-15) || same {
            return InterswitchRoots {
                roots: Vec::new(),
                degenerate: true,
            };
        }
        InterswitchRoots {
            roots: scan_roots(|t| self.interswitch_residual(p, field, t), 0.0, tau_max, points, 1e-14),
            degenerate: false,
        }
    }

    /// `k₁`, `k₂` with `[f, Z] = k₁ f + k₂ Z`; a switch with `k₁ > 0` goes from `X` to `Y`.
    pub fn classify(&self, p: [f64; 2]) -> SwitchClassification {
        let a = [0, 1].map(|i| self.alpha[i] + self.beta[i] * p[i].cos());
        let z = [one_minus_cos(p[0]), one_minus_cos(p[1])];
        let s = [p[0].sin(), p[1].sin()];
        let den = a[0] * z[1] - a[1] * z[0];
        let scale = a[0].abs() * z[1] + a[1].abs() * z[0];
        if den.abs() <= 1e-12 * scale.max(1e-300) {
            return SwitchClassification {
                k1: f64::NAN,
                k2: f64::NAN,
                direction: Direction::Degenerate,
            };
        }
        let k1 = (2.0 * s[0] * z[1] - 2.0 * s[1] * z[0]) / den;
        let k2 = (2.0 * s[1] * a[0] - 2.0 * s[0] * a[1]) / den;
        let direction = if k1 > 1e-12 {
            Direction::XtoY
        } else if k1 < -1e-12 {
            Direction::YtoX
        } else {
            Direction::Degenerate
        };
        SwitchClassification { k1, k2, direction }
    }
}

/// Direction of a switch leaving `field`.
fn leaving(field: Field) -> Direction {
    match field {
        Field::X => Direction::XtoY,
        Field::Y => Direction::YtoX,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub max_switches: usize,
    /// Number of first-switch candidates per initial field.
    pub first_switch_grid: usize,
    /// Sign-change scan density for the inter-switching equation.
    pub scan_points: usize,
    /// RK4 step for arc propagation.
    pub step: f64,
    /// Allowed terminal mismatch of the second neuron (rad).
    pub tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            max_switches: 6,
            first_switch_grid: 2000,
            scan_points: 4096,
            step: 1e-3,
            tol: 1e-6,
        }
    }
}

/// Extremal built from one initial field and first switch time.
#[derive(Debug, Clone, PartialEq)]
struct Chain {
    switches: Vec<f64>,
    points: Vec<[f64; 2]>,
    horizon: f64,
    mismatch: f64,
}

/// Result of the two-neuron synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoNeuronSolution {
    pub pair: ThetaPair,
    pub schedule: SwitchingSchedule,
    /// Switching points `p_k` in phase space.
    pub switch_points: Vec<[f64; 2]>,
    pub classifications: Vec<SwitchClassification>,
    pub target: [f64; 2],
    pub oracle_terminal: [f64; 2],
    pub trajectory: Trajectory,
    /// Number of distinct feasible extremals found by the search.
    pub candidates: usize,
}

impl TwoNeuronSolution {
    pub fn terminal_error(&self) -> [f64; 2] {
        [0, 1].map(|i| (self.oracle_terminal[i] - self.target[i]).abs())
    }

    pub fn control(&self) -> ControlSignal {
        ControlSignal::PiecewiseConstant(self.schedule.clone())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "initial_field": self.schedule.initial_field,
            "switch_times": self.schedule.switch_times,
            "T": self.schedule.horizon,
            "M": self.schedule.bound,
            "target": self.target,
            "oracle_terminal": self.oracle_terminal,
            "k1_signs": self.classifications.iter().map(|c| c.k1.signum() as i32).collect::<Vec<_>>(),
        })
    }
}

struct Search<'a> {
    pair: &'a ThetaPair,
    opts: &'a SynthesisOptions,
    target: [f64; 2],
    tau_max: f64,
    t_cap: f64,
}

impl Search<'_> {
    /// Follows extremal switching from `e^{t₁F₀}(0, 0)` until `θ₁` reaches its target.
    ///
    /// With `forced = Some(k)` the chain takes exactly `k` switches and then flows to the
    /// target, so its mismatch varies continuously in `t₁` across changes of structure.
    fn chain(&self, initial: Field, t1: f64, forced: Option<usize>) -> Option<Chain> {
        let pair = self.pair;
        let step = self.opts.step;
        let p = pair.flow([0.0, 0.0], initial, t1, step);
        if p[0] >= self.target[0] {
            return None;
        }
        if pair.classify(p).direction != leaving(initial) {
            return None;
        }
        let mut chain = Chain {
            switches: vec![t1],
            points: vec![p],
            horizon: 0.0,
            mismatch: 0.0,
        };
        let (mut t, mut p, mut field) = (t1, p, initial.other());
        loop {
            let last = forced.is_some_and(|k| chain.switches.len() >= k);
            let next = if last {
                None
            } else {
                let roots = pair.interswitch_times(p, field, self.tau_max, self.opts.scan_points);
                if roots.degenerate {
                    return None;
                }
                roots.roots.iter().find_map(|&tau| {
                    let q = pair.flow(p, field, tau, step);
                    (pair.classify(q).direction == leaving(field)).then_some((tau, q))
                })
            };
            if forced.is_none() || last {
                let reach = next.map_or(self.t_cap - t, |(tau, _)| tau);
                if let Some((dt, q)) = pair.flow_until(p, field, reach, self.target[0], step) {
                    chain.horizon = t + dt;
                    chain.mismatch = q[1] - self.target[1];
                    return Some(chain);
                }
            }
            let (tau, q) = next?;
            if chain.switches.len() >= self.opts.max_switches {
                return None;
            }
            t += tau;
            if !(t < self.t_cap) {
                return None;
            }
            chain.switches.push(t);
            chain.points.push(q);
            p = q;
            field = field.other();
        }
    }

    /// Feasible extremals with first switch in `[a, b]`, given the free chains at the ends.
    fn refine(&self, initial: Field, (a, ca): (f64, &Chain), (b, cb): (f64, &Chain)) -> Vec<Chain> {
        let mut ks = vec![ca.switches.len()];
        if cb.switches.len() != ks[0] {
            ks.push(cb.switches.len());
        }
        let mut found = Vec::new();
        for k in ks {
            let ends = if ca.switches.len() == k && cb.switches.len() == k {
                Some((ca.mismatch, cb.mismatch))
            } else {
                match (self.chain(initial, a, Some(k)), self.chain(initial, b, Some(k))) {
                    (Some(x), Some(y)) => Some((x.mismatch, y.mismatch)),
                    _ => None,
                }
            };
            let Some((ga, gb)) = ends else { continue };
            if ga.signum() == gb.signum() {
                continue;
            }
            let g = |t1: f64| self.chain(initial, t1, Some(k)).map_or(f64::NAN, |c| c.mismatch);
            let Ok(t1) = brent(g, a, b, 1e-14) else { continue };
            if let Some(c) = self.chain(initial, t1, None) {
                if c.switches.len() == k && c.mismatch.abs() <= self.opts.tol {
                    found.push(c);
                }
            }
        }
        found
    }

    fn no_switch(&self, field: Field) -> Option<Chain> {
        let (dt, q) = self.pair.flow_until([0.0, 0.0], field, self.t_cap, self.target[0], self.opts.step)?;
        Some(Chain {
            switches: Vec::new(),
            points: Vec::new(),
            horizon: dt,
            mismatch: q[1] - self.target[1],
        })
    }
}

/// Minimum-time bang-bang control taking two Theta neurons from `(0, 0)` to
/// `(2m₁π, 2m₂π)`.
///
/// For each initial field and each first-switch time on a grid, later switches follow
/// from the smallest admissible root of the inter-switching equation, and the arc ends
/// when neuron 1 reaches its target. The remaining mismatch of neuron 2 is driven to zero
/// by Brent's method in the first switch time, and the fastest feasible extremal wins.
pub fn synthesize(currents: [f64; 2], bound: f64, windings: [u32; 2], opts: &SynthesisOptions) -> Result<TwoNeuronSolution> {
    if windings.contains(&0) {
        return Err(Error::Domain("target windings must be positive".into()));
    }
    if (currents[0] - currents[1]).abs() < 1e-12 {
        return Err(Error::Domain("the two baseline currents must differ".into()));
    }
    let pair = ThetaPair::new(currents, bound)?;
    let target = windings.map(|m| 2.0 * PI * m as f64);
    let periods = currents.map(|i| PI / i.sqrt());
    let slow = periods[0].max(periods[1]);
    let search = Search {
        pair: &pair,
        opts,
        target,
        tau_max: 2.0 * slow,
        t_cap: 2.0 * (windings[0] as f64 * periods[0]).max(windings[1] as f64 * periods[1]),
    };

    let mut feasible: Vec<(Field, f64, Chain)> = Vec::new();
    if bound == 0.0 {
        if let Some(c) = search.no_switch(Field::Y).filter(|c| c.mismatch.abs() <= opts.tol) {
            feasible.push((Field::Y, 0.0, c));
        }
    } else {
        for field in [Field::X, Field::Y] {
            if let Some(c) = search.no_switch(field).filter(|c| c.mismatch.abs() <= opts.tol) {
                feasible.push((field, 0.0, c));
            }
            let t_hi = pair
                .flow_until([0.0, 0.0], field, search.t_cap, target[0], opts.step)
                .map_or(search.t_cap, |(t, _)| t);
            let n = opts.first_switch_grid.max(2);
            let grid: Vec<f64> = (1..=n).map(|k| t_hi * k as f64 / (n + 1) as f64).collect();
            let chains: Vec<Option<Chain>> = grid.par_iter().map(|&t1| search.chain(field, t1, None)).collect();
            let roots: Vec<Chain> = (0..n - 1)
                .into_par_iter()
                .flat_map_iter(|k| match (&chains[k], &chains[k + 1]) {
                    (Some(a), Some(b)) => search.refine(field, (grid[k], a), (grid[k + 1], b)),
                    _ => Vec::new(),
                })
                .collect();
            feasible.extend(roots.into_iter().map(|c| (field, c.switches[0], c)));
        }
    }

    let candidates = feasible.len();
    let best = feasible
        .into_iter()
        .min_by(|a, b| {
            a.2.horizon
                .total_cmp(&b.2.horizon)
                .then(a.2.switches.len().cmp(&b.2.switches.len()))
                .then(a.1.total_cmp(&b.1))
        })
        .ok_or_else(|| {
            Error::SearchExhausted(format!(
                "no extremal with at most {} switches reaches ({}, {}) under M = {bound}",
                opts.max_switches, target[0], target[1]
            ))
        })?;
    let (initial, _, chain) = best;

    let schedule = SwitchingSchedule::new(initial, chain.switches.clone(), chain.horizon, bound)?;
    let models = pair.models();
    let control = ControlSignal::PiecewiseConstant(schedule.clone());
    let trajectory = integrate(&models, &control, chain.horizon, &[0.0, 0.0], chain.horizon / 4096.0)?;
    let end = trajectory.terminal();
    let oracle_terminal = [end[0], end[1]];
    Ok(TwoNeuronSolution {
        pair,
        classifications: chain.points.iter().map(|&p| pair.classify(p)).collect(),
        switch_points: chain.points,
        schedule,
        target,
        oracle_terminal,
        trajectory,
        candidates,
    })
}
