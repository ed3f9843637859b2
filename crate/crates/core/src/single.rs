//! Minimum-power and minimum-time control of a single neuron.
//!
//! The minimum-power problem spikes a Theta neuron (`θ: 0 → 2π` at time `T`) while
//! minimizing `∫u²`. Along extremals the Hamiltonian is constant and equal to `2λ₀`,
//! which yields the feedback law
//!
//! ```text
//! u*(θ) = (−a + √(a² − 2λ₀ z²)) / z,   a = α + β cos θ,  z = 1 − cos θ,
//! ```
//!
//! and the spiking time `T(λ₀) = ∫₀^{2π} dθ / √(a² − 2λ₀ z²)`. Under an amplitude
//! bound the law is clipped to `±M`; the clipped set is a single θ-interval
//! symmetric about `π`, so a bounded optimum has exactly two switches.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::control::{ControlSignal, FeedbackLaw};
use crate::error::{Error, Result};
use crate::model::{ModelKind, PhaseModel};
use crate::quad;
use crate::roots::brent;

const QUAD_TOL: f64 = 1e-10;

#[inline]
fn one_minus_cos(theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    2.0 * s * s
}

/// Discriminant `(α + β cos θ)² − 2λ₀(1 − cos θ)²`.
#[inline]
pub fn discriminant(theta: f64, lambda0: f64, alpha: f64, beta: f64) -> f64 {
    let a = alpha + beta * theta.cos();
    let z = one_minus_cos(theta);
    a * a - 2.0 * lambda0 * z * z
}

/// Unbounded minimum-power feedback law.
///
/// Evaluated in the rationalized form `−2λ₀z / (a + √D)`, which has no removable
/// singularity at `θ ≡ 0 (mod 2π)` and returns exactly `0` there.
pub fn u_star(theta: f64, lambda0: f64, alpha: f64, beta: f64) -> Result<f64> {
    let d = discriminant(theta, lambda0, alpha, beta);
    if d < 0.0 {
        return Err(Error::InfeasibleMultiplier { lambda0, theta });
    }
    let a = alpha + beta * theta.cos();
    let z = one_minus_cos(theta);
    Ok(-2.0 * lambda0 * z / (a + d.sqrt()))
}

/// Minimum-power law clipped to `[−M, M]`.
///
/// Where the discriminant is negative the law is on the `−M` arc: that set is contained
/// in `{u* < −M}` whenever the slow-side saturation is feasible.
pub fn saturated_law(theta: f64, lambda0: f64, alpha: f64, beta: f64, bound: f64) -> f64 {
    match u_star(theta, lambda0, alpha, beta) {
        Ok(u) => u.clamp(-bound, bound),
        Err(_) => -bound,
    }
}

/// Largest multiplier for which the unbounded discriminant stays positive on the orbit:
/// `λ* = min_θ a²/(2z²) = (α − β)²/8 = I²/2`.
pub fn grazing_multiplier(alpha: f64, beta: f64) -> f64 {
    (alpha - beta).powi(2) / 8.0
}

fn check_theta_params(alpha: f64, beta: f64) -> Result<()> {
    if (alpha + beta - 2.0).abs() > 1e-12 || !(alpha > beta) {
        return Err(Error::Domain(format!(
            "Theta parameters need α + β = 2 and I = (α − β)/2 > 0, got α = {alpha}, β = {beta}"
        )));
    }
    Ok(())
}

/// Spiking time of the unbounded extremal with initial multiplier `λ₀`.
pub fn spike_time_unbounded(lambda0: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_theta_params(alpha, beta)?;
    if lambda0 >= grazing_multiplier(alpha, beta) {
        return Err(Error::InfeasibleMultiplier { lambda0, theta: PI });
    }
    let half = quad::integrate(
        |th| 1.0 / discriminant(th, lambda0, alpha, beta).sqrt(),
        0.0,
        PI,
        0.5 * QUAD_TOL,
    )?;
    Ok(2.0 * half)
}

/// Spiking-time integral with the discriminant's PRC factor to the first power,
/// `∫ dθ / √(a² − 2λ₀ z)`.
///
/// This pairing is not consistent with the feedback law (see the round-trip test);
/// it is kept to document the difference.
pub fn spike_time_linear_discriminant(lambda0: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_theta_params(alpha, beta)?;
    let f = |th: f64| {
        let a = alpha + beta * th.cos();
        a * a - 2.0 * lambda0 * one_minus_cos(th)
    };
    let worst = (0..=2048).map(|k| f(PI * k as f64 / 2048.0)).fold(f64::INFINITY, f64::min);
    if worst <= 0.0 {
        return Err(Error::InfeasibleMultiplier { lambda0, theta: PI });
    }
    Ok(2.0 * quad::integrate(|th| 1.0 / f(th).sqrt(), 0.0, PI, 0.5 * QUAD_TOL)?)
}

/// Where the bounded law sits on `±M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    /// `+M` (fast side) or `−M` (slow side).
    pub level: f64,
    /// Switch-on angle in `[0, π]`; the arc ends at `2π − theta_on`.
    pub theta_on: f64,
}

impl Saturation {
    pub fn theta_off(&self) -> f64 {
        2.0 * PI - self.theta_on
    }
}

/// Closed-form saturation interval of the clipped law, if any.
///
/// `u* > M ⇔ h(c) < −(λ₀ + M²/2)/M` and `u* < −M ⇔ M < h(c) < (λ₀ + M²/2)/M` with
/// `h(c) = (α + βc)/(1 − c)` increasing in `c = cos θ`, which makes the set one
/// interval around `θ = π`.
pub fn saturation(lambda0: f64, alpha: f64, beta: f64, bound: f64) -> Option<Saturation> {
    if !bound.is_finite() || bound <= 0.0 {
        return None;
    }
    let current = 0.5 * (alpha - beta);
    let shifted = lambda0 + 0.5 * bound * bound;
    let (level, r) = if lambda0 < 0.0 {
        (bound, -shifted / bound)
    } else if lambda0 > 0.0 && bound < current {
        (-bound, shifted / bound)
    } else {
        return None;
    };
    if r <= current {
        return None;
    }
    let c = ((r - alpha) / (beta + r)).clamp(-1.0, 1.0);
    Some(Saturation {
        level,
        theta_on: c.acos(),
    })
}

/// Spiking time `∫ dθ / (a + z·u_M)` of the clipped law.
pub fn spike_time_saturated(lambda0: f64, alpha: f64, beta: f64, bound: f64) -> Result<f64> {
    check_theta_params(alpha, beta)?;
    match saturation(lambda0, alpha, beta, bound) {
        None => spike_time_unbounded(lambda0, alpha, beta),
        Some(sat) => {
            let free = quad::integrate(
                |th| 1.0 / discriminant(th, lambda0, alpha, beta).max(0.0).sqrt(),
                0.0,
                sat.theta_on,
                0.25 * QUAD_TOL,
            )?;
            let clipped = quad::integrate(
                |th| 1.0 / (alpha + beta * th.cos() + one_minus_cos(th) * sat.level),
                sat.theta_on,
                PI,
                0.25 * QUAD_TOL,
            )?;
            Ok(2.0 * (free + clipped))
        }
    }
}

/// Minimum-power solution for spiking one Theta neuron at a prescribed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinPowerSolution {
    pub lambda0: f64,
    pub horizon: f64,
    /// Amplitude bound; `f64::INFINITY` when unbounded.
    pub bound: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `(θ_on, θ_off)` pairs where the bound is active (empty or one pair).
    pub switch_angles: Vec<(f64, f64)>,
    /// `+M` or `−M` on the saturated arc, when there is one.
    pub saturation_level: Option<f64>,
    /// `∫₀ᵀ u² dt`.
    pub energy: f64,
}

impl MinPowerSolution {
    pub fn control_at(&self, theta: f64) -> f64 {
        saturated_law(theta, self.lambda0, self.alpha, self.beta, self.bound)
    }

    /// Phase velocity along the solution.
    pub fn velocity_at(&self, theta: f64) -> f64 {
        self.alpha + self.beta * theta.cos() + one_minus_cos(theta) * self.control_at(theta)
    }

    pub fn control(&self) -> ControlSignal {
        ControlSignal::Feedback(FeedbackLaw::MinPower {
            lambda0: self.lambda0,
            alpha: self.alpha,
            beta: self.beta,
            bound: self.bound.is_finite().then_some(self.bound),
        })
    }

    pub fn is_saturated(&self) -> bool {
        !self.switch_angles.is_empty()
    }
}

/// Range of spiking times reachable with `|u| ≤ M`: the fastest is `u ≡ M`, the slowest
/// `u ≡ −M` when the neuron still fires under it and unbounded otherwise.
pub fn feasible_range(alpha: f64, beta: f64, bound: f64) -> Result<(f64, f64)> {
    check_theta_params(alpha, beta)?;
    if !bound.is_finite() {
        return Ok((0.0, f64::INFINITY));
    }
    let current = 0.5 * (alpha - beta);
    let lower = 2.0
        * quad::integrate(
            |th| 1.0 / (alpha + beta * th.cos() + bound * one_minus_cos(th)),
            0.0,
            PI,
            0.5 * QUAD_TOL,
        )?;
    let upper = if bound < current {
        2.0 * quad::integrate(
            |th| 1.0 / (alpha + beta * th.cos() - bound * one_minus_cos(th)),
            0.0,
            PI,
            0.5 * QUAD_TOL,
        )?
    } else {
        f64::INFINITY
    };
    Ok((lower, upper))
}

/// Minimum-power control spiking `model` at `horizon` under `|u| ≤ bound`
/// (`f64::INFINITY` for unbounded).
pub fn solve_min_power(model: &PhaseModel, horizon: f64, bound: f64) -> Result<MinPowerSolution> {
    if model.kind != ModelKind::Theta {
        return Err(Error::Domain("minimum-power synthesis is defined for Theta neurons".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("spike time must be positive, got {horizon}")));
    }
    if !(bound >= 0.0) {
        return Err(Error::Domain(format!("bound must be non-negative, got {bound}")));
    }
    let (alpha, beta) = (model.alpha(), model.beta());
    let natural = model.natural_period();
    let lambda0 = if (horizon - natural).abs() <= 1e-12 * natural {
        0.0
    } else {
        let (lower, upper) = feasible_range(alpha, beta, bound)?;
        if !(horizon > lower && horizon < upper) {
            return Err(Error::Infeasible {
                reason: format!("spike time {horizon} not reachable with |u| <= {bound}"),
                lower,
                upper,
            });
        }
        solve_multiplier(horizon, natural, alpha, beta, bound)?
    };
    let sat = saturation(lambda0, alpha, beta, bound);
    let mut sol = MinPowerSolution {
        lambda0,
        horizon,
        bound,
        alpha,
        beta,
        switch_angles: sat.iter().map(|s| (s.theta_on, s.theta_off())).collect(),
        saturation_level: sat.map(|s| s.level),
        energy: 0.0,
    };
    verify_two_switch(&sol)?;
    sol.energy = energy(&sol)?;
    Ok(sol)
}

fn solve_multiplier(horizon: f64, natural: f64, alpha: f64, beta: f64, bound: f64) -> Result<f64> {
    let g = |l: f64| spike_time_saturated(l, alpha, beta, bound).map(|t| t - horizon);
    if horizon < natural {
        let mut lo = -1.0;
        let mut tries = 0;
        while g(lo)? > 0.0 {
            lo *= 4.0;
            tries += 1;
            if tries > 200 {
                return Err(Error::Numeric("could not bracket λ₀ on the fast side".into()));
            }
        }
        root(g, lo, 0.0)
    } else {
        let current = 0.5 * (alpha - beta);
        let hi = if bound < current {
            let mut hi = 1.0;
            let mut tries = 0;
            while g(hi)? < 0.0 {
                hi *= 4.0;
                tries += 1;
                if tries > 200 {
                    return Err(Error::Numeric("could not bracket λ₀ on the slow side".into()));
                }
            }
            hi
        } else {
            let star = grazing_multiplier(alpha, beta);
            let mut delta = 0.5;
            loop {
                let hi = star * (1.0 - delta);
                if g(hi)? > 0.0 {
                    break hi;
                }
                delta *= 0.1;
                if delta < 1e-15 {
                    return Err(Error::Infeasible {
                        reason: format!("spike time {horizon} too close to the grazing limit"),
                        lower: natural,
                        upper: f64::INFINITY,
                    });
                }
            }
        };
        root(g, 0.0, hi)
    }
}

fn root<G: Fn(f64) -> Result<f64>>(g: G, lo: f64, hi: f64) -> Result<f64> {
    let mut failure = None;
    let r = brent(
        |l| match g(l) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-15,
    );
    match (failure, r) {
        (Some(e), _) => Err(e),
        (None, r) => r,
    }
}

/// The clipped law must respect the bound outside the saturated arc; having more than
/// one arc would show up here as an excursion past `M`.
fn verify_two_switch(sol: &MinPowerSolution) -> Result<()> {
    if !sol.bound.is_finite() {
        return Ok(());
    }
    let (on, off) = sol.switch_angles.first().copied().unwrap_or((PI, PI));
    for k in 0..=4096 {
        let th = 2.0 * PI * k as f64 / 4096.0;
        if th > on && th < off {
            continue;
        }
        if let Ok(u) = u_star(th, sol.lambda0, sol.alpha, sol.beta) {
            if u.abs() > sol.bound * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Numeric(format!(
                    "unsaturated law exceeds the bound at θ = {th} (u = {u}); more than two switches"
                )));
            }
        } else if sol.saturation_level != Some(-sol.bound) {
            return Err(Error::InfeasibleMultiplier {
                lambda0: sol.lambda0,
                theta: th,
            });
        }
    }
    Ok(())
}

fn energy(sol: &MinPowerSolution) -> Result<f64> {
    let e = |th: f64| {
        let u = sol.control_at(th);
        u * u / sol.velocity_at(th)
    };
    let split = sol.switch_angles.first().map_or(0.5 * PI, |s| s.0);
    Ok(2.0 * (quad::integrate(e, 0.0, split, 0.25 * QUAD_TOL)? + quad::integrate(e, split, PI, 0.25 * QUAD_TOL)?))
}

/// State–costate history of an unbounded minimum-power extremal.
#[derive(Debug, Clone)]
pub struct Extremal {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Extremal {
    /// `λ(α + β cos θ) − λ²(1 − cos θ)²/4` at every sample.
    pub fn hamiltonian(&self, alpha: f64, beta: f64) -> Vec<f64> {
        self.theta
            .iter()
            .zip(&self.lambda)
            .map(|(&th, &l)| {
                let z = one_minus_cos(th);
                l * (alpha + beta * th.cos()) - 0.25 * l * l * z * z
            })
            .collect()
    }
}

/// Integrates `θ̇ = a − λz²/2`, `λ̇ = λ(β − u) sin θ` with `u = −λz/2` from `(0, λ₀)`.
pub fn extremal(lambda0: f64, alpha: f64, beta: f64, horizon: f64, steps: usize) -> Result<Extremal> {
    let rhs = |th: f64, l: f64| {
        let z = one_minus_cos(th);
        let u = -0.5 * l * z;
        (alpha + beta * th.cos() + z * u, l * (beta - u) * th.sin())
    };
    let h = horizon / steps as f64;
    let (mut th, mut l) = (0.0, lambda0);
    let mut out = Extremal {
        times: vec![0.0],
        theta: vec![th],
        lambda: vec![l],
    };
    for i in 1..=steps {
        let (a1, b1) = rhs(th, l);
        let (a2, b2) = rhs(th + 0.5 * h * a1, l + 0.5 * h * b1);
        let (a3, b3) = rhs(th + 0.5 * h * a2, l + 0.5 * h * b2);
        let (a4, b4) = rhs(th + h * a3, l + h * b3);
        th += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        l += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        if !(th.is_finite() && l.is_finite()) {
            return Err(Error::NonFinite { time: h * i as f64 });
        }
        out.times.push(h * i as f64);
        out.theta.push(th);
        out.lambda.push(l);
    }
    Ok(out)
}

/// Minimum-time spiking of one neuron under `|u| ≤ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeOptimalSingle {
    pub control: ControlSignal,
    pub t_min: f64,
}

/// `u = M·sign(Z(θ))` and `T_min = ∫_{Z≥0} dθ/(f + ZM) + ∫_{Z<0} dθ/(f − ZM)`.
pub fn time_optimal_single(model: &PhaseModel, bound: f64) -> Result<TimeOptimalSingle> {
    if !(bound >= 0.0) || !bound.is_finite() {
        return Err(Error::Domain(format!("bound must be finite and >= 0, got {bound}")));
    }
    let speed = |th: f64| model.drift(th) + model.prc(th).abs() * bound;
    for k in 0..=4096 {
        let th = 2.0 * PI * k as f64 / 4096.0;
        let v = speed(th);
        if !(v > 0.0) {
            return Err(Error::Infeasible {
                reason: format!("phase velocity {v} <= 0 at θ = {th}; the neuron cannot pass"),
                lower: f64::INFINITY,
                upper: f64::INFINITY,
            });
        }
    }
    // Z changes sign only at multiples of π for the supported PRCs
    let t_min = quad::integrate(|th| 1.0 / speed(th), 0.0, PI, 0.5 * QUAD_TOL)?
        + quad::integrate(|th| 1.0 / speed(th), PI, 2.0 * PI, 0.5 * QUAD_TOL)?;
    Ok(TimeOptimalSingle {
        control: ControlSignal::Feedback(FeedbackLaw::MaxVelocity {
            model: *model,
            bound,
        }),
        t_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, spike_times};

    const A: f64 = 1.25;
    const B: f64 = 0.75;

    fn rk4_spike(law: impl Fn(f64) -> f64, alpha: f64, beta: f64, t_max: f64) -> f64 {
        // first time the phase reaches 2π, by RK4 plus linear interpolation
        let f = |th: f64| alpha + beta * th.cos() + one_minus_cos(th) * law(th);
        let h = 1e-4;
        let mut th = 0.0;
        let mut t = 0.0;
        while t < t_max {
            let k1 = f(th);
            let k2 = f(th + 0.5 * h * k1);
            let k3 = f(th + 0.5 * h * k2);
            let k4 = f(th + h * k3);
            let next = th + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if next >= 2.0 * PI {
                return t + h * (2.0 * PI - th) / (next - th);
            }
            th = next;
            t += h;
        }
        f64::INFINITY
    }

    #[test]
    fn zero_multiplier_gives_zero_control() {
        for k in 0..20 {
            assert_eq!(u_star(0.3 * k as f64, 0.0, A, B).unwrap(), 0.0);
        }
    }

    #[test]
    fn control_vanishes_at_spike_phase() {
        for &l in &[-3.0, -0.1, 0.01] {
            assert_eq!(u_star(0.0, l, A, B).unwrap(), 0.0);
            assert!(u_star(2.0 * PI, l, A, B).unwrap().abs() < 1e-15);
            assert!(u_star(1e-9, l, A, B).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn rationalized_form_equals_printed_law() {
        for &l in &[-2.0, -0.4, 0.01] {
            for k in 1..40 {
                let th = 2.0 * PI * k as f64 / 40.0;
                let a = A + B * th.cos();
                let z = 1.0 - th.cos();
                let printed = (-a + (a * a - 2.0 * l * z * z).sqrt()) / z;
                assert!((u_star(th, l, A, B).unwrap() - printed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negative_discriminant_is_an_error() {
        let l = grazing_multiplier(A, B) * 1.5;
        assert!(matches!(u_star(PI, l, A, B), Err(Error::InfeasibleMultiplier { .. })));
        assert!(spike_time_unbounded(l, A, B).is_err());
    }

    #[test]
    fn free_period_from_quadrature() {
        let t = spike_time_unbounded(0.0, A, B).unwrap();
        assert!((t - 2.0 * PI).abs() < 1e-8);
        let t = spike_time_unbounded(0.0, 1.3, 0.7).unwrap();
        assert!((t - PI / 0.3f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn spike_time_monotone_in_multiplier() {
        let star = grazing_multiplier(A, B);
        let ls = [-10.0, -3.0, -1.0, -0.2, 0.0, 0.2 * star, 0.7 * star, 0.99 * star];
        let ts: Vec<f64> = ls.iter().map(|&l| spike_time_unbounded(l, A, B).unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]), "{ts:?}");
    }

    #[test]
    fn unbounded_law_spikes_at_requested_time() {
        let m = PhaseModel::theta(0.25).unwrap();
        let sol = solve_min_power(&m, 4.0, f64::INFINITY).unwrap();
        assert!(sol.lambda0 < 0.0);
        let t = rk4_spike(|th| u_star(th, sol.lambda0, A, B).unwrap(), A, B, 10.0);
        assert!((t - 4.0).abs() < 1e-3, "{t}");
    }

    #[test]
    fn feedback_law_reaches_spike_through_phase_ode() {
        // closing the phase ODE at t = 4 pins u*(π) to the value of the solved law
        let m = PhaseModel::theta(0.25).unwrap();
        let sol = solve_min_power(&m, 4.0, f64::INFINITY).unwrap();
        let u_pi = u_star(PI, sol.lambda0, A, B).unwrap();
        assert!(u_pi > 0.0);
        let t = rk4_spike(|th| u_star(th, sol.lambda0, A, B).unwrap(), A, B, 10.0);
        assert!((t - 4.0).abs() < 1e-4, "{t}");
    }

    #[test]
    fn linear_discriminant_pairing_does_not_close_round_trip() {
        // Pick λ₀ so the first-power integral says T = 4, then simulate the law:
        // the spike lands measurably away from 4, unlike the squared pairing.
        let lambda = brent(|l| spike_time_linear_discriminant(l, A, B).unwrap() - 4.0, -20.0, 0.0, 1e-14).unwrap();
        let t = rk4_spike(|th| u_star(th, lambda, A, B).unwrap(), A, B, 10.0);
        assert!((t - 4.0).abs() > 1e-2, "{t}");
    }

    #[test]
    fn slow_spike_has_positive_multiplier() {
        let m = PhaseModel::theta(0.25).unwrap();
        let sol = solve_min_power(&m, 8.0, 1.0).unwrap();
        assert!(sol.lambda0 > 0.0 && sol.lambda0 < grazing_multiplier(A, B));
        assert!(!sol.is_saturated());
        let t = rk4_spike(|th| sol.control_at(th), A, B, 20.0);
        assert!((t - 8.0).abs() < 1e-3);
    }

    #[test]
    fn fast_spike_saturates_at_bound() {
        let m = PhaseModel::theta(0.25).unwrap();
        let sol = solve_min_power(&m, 3.0, 1.0).unwrap();
        assert_eq!(sol.switch_angles.len(), 1);
        assert_eq!(sol.saturation_level, Some(1.0));
        let (on, off) = sol.switch_angles[0];
        assert!(on < PI && off > PI && on < off);
        assert!((u_star(on, sol.lambda0, A, B).unwrap() - 1.0).abs() < 1e-9);
        assert!((u_star(off, sol.lambda0, A, B).unwrap() - 1.0).abs() < 1e-9);
        assert!((sol.control_at(PI) - 1.0).abs() < 1e-15);
        let t = rk4_spike(|th| sol.control_at(th), A, B, 10.0);
        assert!((t - 3.0).abs() < 3e-3, "{t}");
    }

    #[test]
    fn unsaturated_cases_stay_inside_bound() {
        let m = PhaseModel::theta(0.25).unwrap();
        for &t in &[4.0, 8.0] {
            let sol = solve_min_power(&m, t, 1.0).unwrap();
            assert!(sol.switch_angles.is_empty());
            let worst = (0..=1000)
                .map(|k| u_star(2.0 * PI * k as f64 / 1000.0, sol.lambda0, A, B).unwrap().abs())
                .fold(0.0, f64::max);
            assert!(worst < 1.0, "T = {t}: max |u| = {worst}");
        }
    }

    #[test]
    fn natural_period_needs_no_control() {
        let m = PhaseModel::theta(0.25).unwrap();
        let sol = solve_min_power(&m, 2.0 * PI, 1.0).unwrap();
        assert_eq!(sol.lambda0, 0.0);
        assert_eq!(sol.energy, 0.0);
        assert!(sol.switch_angles.is_empty());
    }

    #[test]
    fn infeasible_spike_time_reports_range() {
        let m = PhaseModel::theta(0.25).unwrap();
        match solve_min_power(&m, 2.0, 1.0) {
            Err(Error::Infeasible { lower, upper, .. }) => {
                assert!((lower - 2.0 * PI / 5f64.sqrt()).abs() < 1e-9);
                assert!(upper.is_infinite());
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
        // slow side is bounded when M < I
        let m = PhaseModel::theta(0.9).unwrap();
        match solve_min_power(&m, 50.0, 0.5) {
            Err(Error::Infeasible { upper, .. }) => assert!(upper.is_finite()),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn slow_side_saturation_with_small_bound() {
        // M < I: slowing down saturates at −M and the clipped law still fires at T
        let m = PhaseModel::theta(0.9).unwrap();
        let (alpha, beta) = (m.alpha(), m.beta());
        let (_, upper) = feasible_range(alpha, beta, 0.5).unwrap();
        let target = upper - 0.05 * (upper - m.natural_period());
        let sol = solve_min_power(&m, target, 0.5).unwrap();
        assert_eq!(sol.saturation_level, Some(-0.5));
        let t = rk4_spike(|th| sol.control_at(th), alpha, beta, 100.0);
        assert!((t - target).abs() < 1e-3 * target, "{t} vs {target}");
    }

    #[test]
    fn energy_matches_time_domain_integral() {
        let m = PhaseModel::theta(0.25).unwrap();
        let sol = solve_min_power(&m, 3.0, 1.0).unwrap();
        let tr = integrate(&[m], &sol.control(), 3.0, &[0.0], 3.0 / 20000.0).unwrap();
        let e: f64 = tr
            .times
            .windows(2)
            .zip(tr.states.windows(2))
            .map(|(t, s)| {
                let (u0, u1) = (sol.control_at(s[0][0]), sol.control_at(s[1][0]));
                0.5 * (t[1] - t[0]) * (u0 * u0 + u1 * u1)
            })
            .sum();
        assert!((e - sol.energy).abs() < 1e-3 * sol.energy, "{e} vs {}", sol.energy);
    }

    #[test]
    fn hamiltonian_is_constant_along_extremal() {
        for &t in &[4.0, 8.0] {
            let sol = solve_min_power(&PhaseModel::theta(0.25).unwrap(), t, f64::INFINITY).unwrap();
            let ext = extremal(sol.lambda0, A, B, t, 4096).unwrap();
            let c = 2.0 * sol.lambda0;
            let dev = ext.hamiltonian(A, B).iter().map(|h| (h - c).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-6 * c.abs(), "T = {t}: {dev}");
            assert!((ext.theta.last().unwrap() - 2.0 * PI).abs() < 1e-4);
        }
    }

    #[test]
    fn extremal_costate_reproduces_feedback_law() {
        let sol = solve_min_power(&PhaseModel::theta(0.25).unwrap(), 4.0, f64::INFINITY).unwrap();
        let ext = extremal(sol.lambda0, A, B, 4.0, 4096).unwrap();
        for (th, l) in ext.theta.iter().zip(&ext.lambda).step_by(64) {
            let from_costate = -0.5 * l * one_minus_cos(*th);
            assert!((from_costate - u_star(*th, sol.lambda0, A, B).unwrap()).abs() < 1e-7);
        }
    }

    #[test]
    fn time_optimal_without_control_is_free_period() {
        let m = PhaseModel::theta(0.25).unwrap();
        let r = time_optimal_single(&m, 0.0).unwrap();
        assert!((r.t_min - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn time_optimal_theta_closed_form() {
        let m = PhaseModel::theta(0.25).unwrap();
        let r = time_optimal_single(&m, 1.0).unwrap();
        let closed = 2.0 * PI / ((A + 1.0f64).powi(2) - (B - 1.0f64).powi(2)).sqrt();
        assert!((r.t_min - closed).abs() < 1e-10);
    }

    #[test]
    fn time_optimal_sinusoidal_matches_simulation() {
        let m = PhaseModel::sinusoidal_with_scale(1.0, 2.0).unwrap();
        let r = time_optimal_single(&m, 0.3).unwrap();
        let tr = integrate(&[m], &r.control, r.t_min + 0.5, &[0.0], 1e-4).unwrap();
        let s = spike_times(&tr);
        assert!((s[0][0] - r.t_min).abs() < 1e-4, "{} vs {}", s[0][0], r.t_min);
    }

    #[test]
    fn time_optimal_rejects_stalling_neuron() {
        // sinusoidal with z larger than ω/M stalls under −M? no: |Z| is used, so stall only
        // arises from negative drift, impossible here; use a tiny-current Theta with M = 0
        // and a constant-drift model with a negative scale still moves forward.
        let m = PhaseModel::sinusoidal_with_scale(1.0, -5.0).unwrap();
        assert!(time_optimal_single(&m, 0.3).is_ok());
        assert!(time_optimal_single(&m, -1.0).is_err());
    }

    #[test]
    fn requires_theta_model() {
        let m = PhaseModel::sniper(1.0).unwrap();
        assert!(solve_min_power(&m, 4.0, 1.0).is_err());
    }
}
