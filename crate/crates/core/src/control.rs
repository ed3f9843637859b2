//! Scalar control inputs `u(t)` shared by an ensemble.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PhaseModel;
use crate::single;

/// Bang vector field: `X = f − MZ` (control `−M`) or `Y = f + MZ` (control `+M`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    X,
    Y,
}

impl Field {
    pub fn sign(self) -> f64 {
        match self {
            Field::X => -1.0,
            Field::Y => 1.0,
        }
    }

    pub fn other(self) -> Field {
        match self {
            Field::X => Field::Y,
            Field::Y => Field::X,
        }
    }
}

/// Bang-bang control: starts on `initial_field` and flips at each switch time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSchedule {
    pub initial_field: Field,
    pub switch_times: Vec<f64>,
    pub horizon: f64,
    pub bound: f64,
}

impl SwitchingSchedule {
    pub fn new(initial_field: Field, switch_times: Vec<f64>, horizon: f64, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::Domain(format!("bang bound must be finite and >= 0, got {bound}")));
        }
        let mut prev = 0.0;
        for &t in &switch_times {
            if !(t > prev) || !(t < horizon) {
                return Err(Error::Domain(format!(
                    "switch times must be strictly increasing inside (0, {horizon}): {switch_times:?}"
                )));
            }
            prev = t;
        }
        Ok(Self {
            initial_field,
            switch_times,
            horizon,
            bound,
        })
    }

    /// Active field on the open segment that contains `t` (right-continuous at switches).
    pub fn field_at(&self, t: f64) -> Field {
        let flips = self.switch_times.iter().take_while(|&&s| s <= t).count();
        if flips % 2 == 0 {
            self.initial_field
        } else {
            self.initial_field.other()
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.field_at(t).sign() * self.bound
    }

    /// Fields of the consecutive arcs, `switch_times.len() + 1` entries.
    pub fn fields(&self) -> Vec<Field> {
        let mut f = self.initial_field;
        let mut out = vec![f];
        for _ in &self.switch_times {
            f = f.other();
            out.push(f);
        }
        out
    }
}

/// State feedback laws evaluated on the phase of the first neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum FeedbackLaw {
    /// Minimum-power law `u*(θ; λ₀)` for a Theta neuron, clipped to `±bound` when finite.
    MinPower {
        lambda0: f64,
        alpha: f64,
        beta: f64,
        bound: Option<f64>,
    },
    /// `u = M·sign(Z(θ))`, which keeps the phase velocity maximal.
    MaxVelocity { model: PhaseModel, bound: f64 },
}

impl FeedbackLaw {
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            FeedbackLaw::MinPower {
                lambda0,
                alpha,
                beta,
                bound,
            } => single::saturated_law(theta, lambda0, alpha, beta, bound.unwrap_or(f64::INFINITY)),
            FeedbackLaw::MaxVelocity { model, bound } => {
                if model.prc(theta) >= 0.0 {
                    bound
                } else {
                    -bound
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Zero-order hold on the left sample.
    Hold,
    Linear,
    /// Global polynomial through all samples (barycentric form).
    Barycentric,
}

/// Control defined by samples at node times.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledControl {
    times: Vec<f64>,
    values: Vec<f64>,
    interpolation: Interpolation,
    bound: Option<f64>,
    bary_weights: Vec<f64>,
}

impl SampledControl {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        interpolation: Interpolation,
        bound: Option<f64>,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::Domain("sampled control needs at least one sample".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("sample times must be strictly increasing".into()));
        }
        let bary_weights = if interpolation == Interpolation::Barycentric {
            barycentric_weights(&times)
        } else {
            Vec::new()
        };
        Ok(Self {
            times,
            values,
            interpolation,
            bound,
            bary_weights,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn eval(&self, t: f64) -> f64 {
        let v = match self.interpolation {
            Interpolation::Hold => {
                let i = self.times.partition_point(|&s| s <= t);
                self.values[i.saturating_sub(1)]
            }
            Interpolation::Linear => {
                let n = self.times.len();
                if n == 1 || t <= self.times[0] {
                    self.values[0]
                } else if t >= self.times[n - 1] {
                    self.values[n - 1]
                } else {
                    let i = self.times.partition_point(|&s| s <= t);
                    let (t0, t1) = (self.times[i - 1], self.times[i]);
                    let s = (t - t0) / (t1 - t0);
                    self.values[i - 1] * (1.0 - s) + self.values[i] * s
                }
            }
            Interpolation::Barycentric => barycentric_eval(&self.times, &self.bary_weights, &self.values, t),
        };
        match self.bound {
            Some(m) => v.clamp(-m, m),
            None => v,
        }
    }
}

/// Barycentric weights `1/∏(x_j − x_k)`, computed on the nodes mapped to `[−1, 1]`
/// and normalized to unit max-magnitude.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    if n == 1 {
        return vec![1.0];
    }
    let (a, b) = (nodes[0], nodes[n - 1]);
    let scale = 2.0 / (b - a);
    let x: Vec<f64> = nodes.iter().map(|&t| (t - a) * scale - 1.0).collect();
    let mut w: Vec<f64> = (0..n)
        .map(|j| {
            let p: f64 = (0..n).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
            1.0 / p
        })
        .collect();
    let wmax = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= wmax);
    w
}

/// Second-form barycentric interpolation; exact at the nodes.
pub fn barycentric_eval(nodes: &[f64], weights: &[f64], values: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xj, &wj), &vj) in nodes.iter().zip(weights).zip(values) {
        let d = x - xj;
        if d == 0.0 {
            return vj;
        }
        let q = wj / d;
        num += q * vj;
        den += q;
    }
    num / den
}

/// A time-parameterized scalar input.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSignal {
    Zero,
    Constant(f64),
    PiecewiseConstant(SwitchingSchedule),
    Feedback(FeedbackLaw),
    Sampled(SampledControl),
}

impl ControlSignal {
    /// Evaluates the control inside the integration step `[t0, t1]`.
    ///
    /// Piecewise-constant controls use the step midpoint so that a switch placed on a
    /// grid point selects the correct arc for every stage of the step.
    pub fn eval_in_step(&self, t: f64, step: (f64, f64), state: &[f64]) -> f64 {
        match self {
            ControlSignal::PiecewiseConstant(s) => s.value_at(0.5 * (step.0 + step.1)),
            _ => self.eval(t, state),
        }
    }

    pub fn eval(&self, t: f64, state: &[f64]) -> f64 {
        match self {
            ControlSignal::Zero => 0.0,
            ControlSignal::Constant(c) => *c,
            ControlSignal::PiecewiseConstant(s) => s.value_at(t),
            ControlSignal::Feedback(law) => law.eval(state.first().copied().unwrap_or(0.0)),
            ControlSignal::Sampled(s) => s.eval(t),
        }
    }

    /// Times at which the control is discontinuous in `t`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ControlSignal::PiecewiseConstant(s) => s.switch_times.clone(),
            _ => Vec::new(),
        }
    }

    pub fn bound(&self) -> Option<f64> {
        match self {
            ControlSignal::Zero => Some(0.0),
            ControlSignal::Constant(c) => Some(c.abs()),
            ControlSignal::PiecewiseConstant(s) => Some(s.bound),
            ControlSignal::Feedback(FeedbackLaw::MinPower { bound, .. }) => *bound,
            ControlSignal::Feedback(FeedbackLaw::MaxVelocity { bound, .. }) => Some(*bound),
            ControlSignal::Sampled(s) => s.bound(),
        }
    }
}

/// Serializable description of a [`ControlSignal`]; round-trips exactly through JSON and TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    Zero,
    Constant {
        value: f64,
    },
    Schedule {
        initial_field: Field,
        switch_times: Vec<f64>,
        horizon: f64,
        bound: f64,
    },
    Feedback {
        law: FeedbackLaw,
    },
    Sampled {
        times: Vec<f64>,
        values: Vec<f64>,
        interpolation: Interpolation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
}

impl ControlSpec {
    pub fn build(&self) -> Result<ControlSignal> {
        Ok(match self {
            ControlSpec::Zero => ControlSignal::Zero,
            ControlSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Domain(format!("constant control must be finite, got {value}")));
                }
                ControlSignal::Constant(*value)
            }
            ControlSpec::Schedule {
                initial_field,
                switch_times,
                horizon,
                bound,
            } => ControlSignal::PiecewiseConstant(SwitchingSchedule::new(
                *initial_field,
                switch_times.clone(),
                *horizon,
                *bound,
            )?),
            ControlSpec::Feedback { law } => ControlSignal::Feedback(*law),
            ControlSpec::Sampled {
                times,
                values,
                interpolation,
                bound,
            } => ControlSignal::Sampled(SampledControl::new(times.clone(), values.clone(), *interpolation, *bound)?),
        })
    }
}

impl From<&ControlSignal> for ControlSpec {
    fn from(c: &ControlSignal) -> Self {
        match c {
            ControlSignal::Zero => ControlSpec::Zero,
            ControlSignal::Constant(value) => ControlSpec::Constant { value: *value },
            ControlSignal::PiecewiseConstant(s) => ControlSpec::Schedule {
                initial_field: s.initial_field,
                switch_times: s.switch_times.clone(),
                horizon: s.horizon,
                bound: s.bound,
            },
            ControlSignal::Feedback(law) => ControlSpec::Feedback { law: *law },
            ControlSignal::Sampled(s) => ControlSpec::Sampled {
                times: s.times.clone(),
                values: s.values.clone(),
                interpolation: s.interpolation,
                bound: s.bound,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trips_through_json() {
        let signals = [
            ControlSignal::Zero,
            ControlSignal::Constant(-0.25),
            ControlSignal::PiecewiseConstant(SwitchingSchedule::new(Field::Y, vec![1.5], 3.0, 0.5).unwrap()),
            ControlSignal::Feedback(FeedbackLaw::MinPower {
                lambda0: -0.1,
                alpha: 1.25,
                beta: 0.75,
                bound: Some(1.0),
            }),
            ControlSignal::Sampled(SampledControl::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.5], Interpolation::Barycentric, None).unwrap()),
        ];
        for c in &signals {
            let spec = ControlSpec::from(c);
            let text = serde_json::to_string(&spec).unwrap();
            let back: ControlSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
            assert_eq!(&back.build().unwrap(), c);
        }
        assert!(serde_json::from_str::<ControlSpec>(r#"{"kind":"constant","value":1,"extra":2}"#).is_err());
    }

    #[test]
    fn schedule_alternates_between_bounds() {
        let s = SwitchingSchedule::new(Field::Y, vec![1.0, 2.5], 4.0, 0.5).unwrap();
        assert_eq!(s.value_at(0.3), 0.5);
        assert_eq!(s.value_at(1.0), -0.5);
        assert_eq!(s.value_at(2.0), -0.5);
        assert_eq!(s.value_at(3.9), 0.5);
        assert_eq!(s.fields(), vec![Field::Y, Field::X, Field::Y]);
    }

    #[test]
    fn schedule_rejects_unordered_switches() {
        assert!(SwitchingSchedule::new(Field::X, vec![2.0, 1.0], 4.0, 1.0).is_err());
        assert!(SwitchingSchedule::new(Field::X, vec![5.0], 4.0, 1.0).is_err());
        assert!(SwitchingSchedule::new(Field::X, vec![0.0], 4.0, 1.0).is_err());
    }

    #[test]
    fn step_midpoint_selects_arc() {
        let s = ControlSignal::PiecewiseConstant(
            SwitchingSchedule::new(Field::X, vec![1.0], 2.0, 1.0).unwrap(),
        );
        // the k4 stage of the step ending at the switch still sees the X arc
        assert_eq!(s.eval_in_step(1.0, (0.9, 1.0), &[0.0]), -1.0);
        assert_eq!(s.eval_in_step(1.0, (1.0, 1.1), &[0.0]), 1.0);
    }

    #[test]
    fn barycentric_reproduces_polynomials() {
        let nodes: Vec<f64> = (0..9).map(|k| (k as f64 * 0.37).sin() * 2.0 + k as f64).collect();
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3) - 0.01 * x.powi(8);
        let vals: Vec<f64> = nodes.iter().map(|&x| p(x)).collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let c = SampledControl::new(nodes.clone(), vals, Interpolation::Barycentric, None).unwrap();
        for k in 0..50 {
            let x = nodes[0] + (nodes[8] - nodes[0]) * k as f64 / 49.0;
            let (got, want) = (c.eval(x), p(x));
            assert!((got - want).abs() < 1e-12 * scale, "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn sampled_bound_clamps() {
        let c = SampledControl::new(vec![0.0, 1.0], vec![-3.0, 3.0], Interpolation::Linear, Some(2.0)).unwrap();
        assert_eq!(c.eval(0.0), -2.0);
        assert_eq!(c.eval(0.5), 0.0);
        assert_eq!(c.eval(1.0), 2.0);
    }

    #[test]
    fn hold_uses_left_sample() {
        let c = SampledControl::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0], Interpolation::Hold, None).unwrap();
        assert_eq!(c.eval(0.99), 1.0);
        assert_eq!(c.eval(1.0), 2.0);
        assert_eq!(c.eval(5.0), 3.0);
    }
}
