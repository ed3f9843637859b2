//! Spike-timing control of phase-model neuron ensembles.

// NaN must fail every range check, so `!(x > 0.0)` is intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod controllability;
pub mod error;
pub mod integrate;
pub mod model;
pub mod nlp;
pub mod numfmt;
pub mod pseudospectral;
pub mod quad;
pub mod report;
pub mod roots;
pub mod single;
pub mod two_neuron;

pub use control::{ControlSignal, ControlSpec, FeedbackLaw, Field, Interpolation, SampledControl, SwitchingSchedule};
pub use error::{Error, Result};
pub use integrate::{integrate, spike_times, Trajectory};
pub use model::{ModelKind, PhaseModel};
pub use report::SolveReport;
