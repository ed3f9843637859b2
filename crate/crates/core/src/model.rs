//! Phase-reduced oscillator models `θ̇ = f(θ) + Z(θ)·u`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Type I neuron: `f = (1+I) + (1−I)cos θ`, `Z = 1 − cos θ`.
    Theta,
    /// Constant drift with SNIPER PRC: `f = ω`, `Z = z(1 − cos θ)`.
    Sniper,
    /// Constant drift with sinusoidal PRC: `f = ω`, `Z = z sin θ`.
    Sinusoidal,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Theta => "theta",
            ModelKind::Sniper => "sniper",
            ModelKind::Sinusoidal => "sinusoidal",
        }
    }
}

/// A single phase oscillator.
///
/// For Theta models `current` is the baseline current `I` and `omega = 2√I`; for the
/// constant-drift models `prc_scale` is the PRC amplitude `z` (conventionally `2/ω`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    pub kind: ModelKind,
    pub omega: f64,
    pub current: f64,
    pub prc_scale: f64,
}

impl PhaseModel {
    /// Theta neuron with baseline current `I > 0` (periodic regime).
    pub fn theta(current: f64) -> Result<Self> {
        if !(current > 0.0) || !current.is_finite() {
            return Err(Error::Domain(format!(
                "theta baseline current must be positive, got {current}"
            )));
        }
        Ok(Self {
            kind: ModelKind::Theta,
            omega: 2.0 * current.sqrt(),
            current,
            prc_scale: 1.0,
        })
    }

    /// Theta neuron with angular frequency `ω`, i.e. `I = ω²/4`.
    pub fn theta_from_omega(omega: f64) -> Result<Self> {
        check_omega(omega)?;
        Self::theta(omega * omega / 4.0)
    }

    /// SNIPER model with the conventional `z = 2/ω`.
    pub fn sniper(omega: f64) -> Result<Self> {
        check_omega(omega)?;
        Self::sniper_with_scale(omega, 2.0 / omega)
    }

    pub fn sniper_with_scale(omega: f64, z: f64) -> Result<Self> {
        check_omega(omega)?;
        check_scale(z)?;
        Ok(Self {
            kind: ModelKind::Sniper,
            omega,
            current: 0.0,
            prc_scale: z,
        })
    }

    /// Sinusoidal-PRC model with the conventional `z = 2/ω`.
    pub fn sinusoidal(omega: f64) -> Result<Self> {
        check_omega(omega)?;
        Self::sinusoidal_with_scale(omega, 2.0 / omega)
    }

    pub fn sinusoidal_with_scale(omega: f64, z: f64) -> Result<Self> {
        check_omega(omega)?;
        check_scale(z)?;
        Ok(Self {
            kind: ModelKind::Sinusoidal,
            omega,
            current: 0.0,
            prc_scale: z,
        })
    }

    /// Builds a model of the given kind from its angular frequency, using `prc_scale`
    /// when given and the `2/ω` convention otherwise.
    pub fn from_omega(kind: ModelKind, omega: f64, prc_scale: Option<f64>) -> Result<Self> {
        match kind {
            ModelKind::Theta => Self::theta_from_omega(omega),
            ModelKind::Sniper => Self::sniper_with_scale(omega, prc_scale.unwrap_or(2.0 / omega)),
            ModelKind::Sinusoidal => {
                Self::sinusoidal_with_scale(omega, prc_scale.unwrap_or(2.0 / omega))
            }
        }
    }

    /// `α = 1 + I` (Theta only; `1` otherwise).
    pub fn alpha(&self) -> f64 {
        1.0 + self.current
    }

    /// `β = 1 − I` (Theta only).
    pub fn beta(&self) -> f64 {
        1.0 - self.current
    }

    pub fn drift(&self, theta: f64) -> f64 {
        match self.kind {
            ModelKind::Theta => self.alpha() + self.beta() * theta.cos(),
            ModelKind::Sniper | ModelKind::Sinusoidal => self.omega,
        }
    }

    pub fn drift_deriv(&self, theta: f64) -> f64 {
        match self.kind {
            ModelKind::Theta => -self.beta() * theta.sin(),
            _ => 0.0,
        }
    }

    pub fn drift_deriv2(&self, theta: f64) -> f64 {
        match self.kind {
            ModelKind::Theta => -self.beta() * theta.cos(),
            _ => 0.0,
        }
    }

    /// Phase response curve `Z(θ)`.
    pub fn prc(&self, theta: f64) -> f64 {
        match self.kind {
            ModelKind::Theta => 1.0 - theta.cos(),
            ModelKind::Sniper => self.prc_scale * (1.0 - theta.cos()),
            ModelKind::Sinusoidal => self.prc_scale * theta.sin(),
        }
    }

    pub fn prc_deriv(&self, theta: f64) -> f64 {
        match self.kind {
            ModelKind::Theta => theta.sin(),
            ModelKind::Sniper => self.prc_scale * theta.sin(),
            ModelKind::Sinusoidal => self.prc_scale * theta.cos(),
        }
    }

    pub fn prc_deriv2(&self, theta: f64) -> f64 {
        match self.kind {
            ModelKind::Theta => theta.cos(),
            ModelKind::Sniper => self.prc_scale * theta.cos(),
            ModelKind::Sinusoidal => -self.prc_scale * theta.sin(),
        }
    }

    /// Phase velocity `f(θ) + Z(θ)·u`.
    #[inline]
    pub fn velocity(&self, theta: f64, u: f64) -> f64 {
        self.drift(theta) + self.prc(theta) * u
    }

    /// Period of the uncontrolled orbit.
    pub fn natural_period(&self) -> f64 {
        match self.kind {
            ModelKind::Theta => PI / self.current.sqrt(),
            _ => 2.0 * PI / self.omega,
        }
    }

    /// Scalar parameter that distinguishes models of one kind: `I` for Theta, `ω` otherwise.
    pub fn frequency_key(&self) -> f64 {
        match self.kind {
            ModelKind::Theta => self.current,
            _ => self.omega,
        }
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "angular frequency must be positive, got {omega}"
        )))
    }
}

fn check_scale(z: f64) -> Result<()> {
    if z.is_finite() && z != 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("PRC scale must be finite and nonzero, got {z}")))
    }
}

/// Closed-form free evolution of a Theta neuron,
/// `θ(t) = 2·atan(tan(√I (t + c)) / √I)`, continued across the branch cuts of `tan`
/// so that the phase is continuous and increasing.
pub fn free_evolution_theta(current: f64, t: f64, c: f64) -> Result<f64> {
    if !(current > 0.0) {
        return Err(Error::Domain(format!(
            "free evolution needs I > 0 (excitable regime has no periodic orbit), got {current}"
        )));
    }
    let s = current.sqrt();
    let x = s * (t + c);
    // one extra half-turn per tan singularity at x = π/2 + kπ
    let k = ((x + 0.5 * PI) / PI).floor();
    let y = x - k * PI;
    Ok(2.0 * (y.tan() / s).atan() + 2.0 * PI * k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_beta_sum_to_two() {
        for &i in &[0.01, 0.25, 0.9, 3.0, 100.0] {
            let m = PhaseModel::theta(i).unwrap();
            assert!((m.alpha() + m.beta() - 2.0).abs() < 1e-15);
            assert!((m.omega - 2.0 * i.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn theta_drift_positive_for_positive_current() {
        let m = PhaseModel::theta(0.05).unwrap();
        for k in 0..1000 {
            let th = 2.0 * PI * k as f64 / 1000.0;
            assert!(m.drift(th) > 0.0);
        }
    }

    #[test]
    fn default_prc_scale_is_two_over_omega() {
        let s = PhaseModel::sniper(4.0).unwrap();
        assert_eq!(s.prc_scale, 0.5);
        assert!((s.prc(PI) - 1.0).abs() < 1e-15);
        let q = PhaseModel::sinusoidal(2.0).unwrap();
        assert!((q.prc(0.5 * PI) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PhaseModel::theta(0.0).is_err());
        assert!(PhaseModel::theta(-0.1).is_err());
        assert!(PhaseModel::sniper(0.0).is_err());
        assert!(PhaseModel::sinusoidal_with_scale(1.0, 0.0).is_err());
        assert!(free_evolution_theta(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn free_evolution_period_of_fast_neuron() {
        // I = 100 fires every π/10.
        let th = free_evolution_theta(100.0, PI / 10.0, 0.0).unwrap();
        assert!((th - 2.0 * PI).abs() < 1e-12);
        let th2 = free_evolution_theta(100.0, PI / 5.0, 0.0).unwrap();
        assert!((th2 - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn free_evolution_unit_frequency() {
        let th = free_evolution_theta(0.25, 2.0 * PI, 0.0).unwrap();
        assert!((th - 2.0 * PI).abs() < 1e-12);
        assert_eq!(free_evolution_theta(0.25, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn free_evolution_matches_rk4() {
        // Oracle: RK4 on θ̇ = (1+I) + (1−I)cos θ with a fine step.
        let i = 0.3;
        let period = PI / f64::sqrt(i);
        let f = |th: f64| (1.0 + i) + (1.0 - i) * th.cos();
        let n = 20_000;
        let h = period / n as f64;
        let mut th = 0.0;
        for _ in 0..n {
            let k1 = f(th);
            let k2 = f(th + 0.5 * h * k1);
            let k3 = f(th + 0.5 * h * k2);
            let k4 = f(th + h * k3);
            th += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((th - 2.0 * PI).abs() < 1e-8);
        let closed = free_evolution_theta(i, period, 0.0).unwrap();
        assert!((closed - th).abs() < 1e-8);
    }

    #[test]
    fn free_evolution_is_continuous_and_increasing() {
        let mut prev = free_evolution_theta(0.7, 0.0, 0.3).unwrap();
        for k in 1..5000 {
            let t = k as f64 * 0.003;
            let th = free_evolution_theta(0.7, t, 0.3).unwrap();
            assert!(th > prev);
            assert!(th - prev < 0.02);
            prev = th;
        }
    }
}
