//! Uniform result record for every solver, serialized with nine significant digits.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::control::{ControlSignal, ControlSpec};
use crate::error::{Error, Result};
use crate::integrate::{spike_times, Trajectory};
use crate::model::PhaseModel;
use crate::numfmt::round_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReport {
    pub command: String,
    pub models: Vec<PhaseModel>,
    pub horizon: f64,
    /// Terminal phase targets; empty for plain simulation.
    #[serde(default)]
    pub target: Vec<f64>,
    pub control: ControlSpec,
    /// Oracle phases at `T`.
    pub terminal_phase: Vec<f64>,
    /// `terminal_phase − target`; empty when there is no target.
    #[serde(default)]
    pub terminal_error: Vec<f64>,
    /// Energy `∫u²` for the energy problems, `T` for the time-optimal ones.
    #[serde(default)]
    pub cost: Option<f64>,
    pub spikes: Vec<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Solver-specific diagnostics (convergence data, switch classifications, warnings).
    #[serde(default)]
    pub diagnostics: Map<String, Value>,
}

impl SolveReport {
    pub fn new(
        command: &str,
        models: &[PhaseModel],
        control: &ControlSignal,
        trajectory: &Trajectory,
        target: &[f64],
    ) -> Result<Self> {
        let horizon = trajectory.times.last().copied().unwrap_or(0.0);
        let terminal_phase = trajectory.terminal().to_vec();
        if !target.is_empty() && target.len() != terminal_phase.len() {
            return Err(Error::LengthMismatch {
                expected: terminal_phase.len(),
                got: target.len(),
            });
        }
        let terminal_error = target.iter().zip(&terminal_phase).map(|(t, p)| p - t).collect();
        Ok(Self {
            command: command.to_string(),
            models: models.to_vec(),
            horizon,
            target: target.to_vec(),
            control: ControlSpec::from(control),
            terminal_phase,
            terminal_error,
            cost: None,
            spikes: spike_times(trajectory),
            seed: None,
            diagnostics: Map::new(),
        })
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = Some(cost);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn diagnostic(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.diagnostics.insert(key.to_string(), v);
        self
    }

    pub fn max_terminal_error(&self) -> f64 {
        self.terminal_error.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    /// Pretty JSON with every float rounded to nine significant digits, newline terminated.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report is always serializable");
        round_json(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("JSON value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Domain(format!("invalid report: {e}")))
    }
}
