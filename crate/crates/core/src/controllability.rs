//! Lie-bracket rank condition for finite neuron ensembles.
//!
//! An ensemble `Θ̇ = f(Θ) + Z(Θ)u` is controllable when `{f, ad_f^k Z}` spans `ℝⁿ`.
//! Each component of `ad_f^k Z` depends only on its own neuron, so the brackets have
//! closed forms and the span is a numerical rank computation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, PhaseModel};

/// Frequencies closer than this are flagged even if the numerical rank passes.
pub const CLOSE_FREQUENCY: f64 = 1e-6;
/// Default rank threshold relative to the largest singular value.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

fn common_kind(models: &[PhaseModel]) -> Result<ModelKind> {
    let kind = models
        .first()
        .ok_or_else(|| Error::Domain("empty ensemble".into()))?
        .kind;
    if models.iter().any(|m| m.kind != kind) {
        return Err(Error::MixedKinds);
    }
    Ok(kind)
}

/// `ad_f^k Z` for one neuron (`k = 0` gives `Z`).
pub fn bracket_component(model: &PhaseModel, theta: f64, k: u32) -> f64 {
    if k == 0 {
        return model.prc(theta);
    }
    match model.kind {
        ModelKind::Theta => {
            let (a, b) = (model.alpha(), model.beta());
            let m = k.div_ceil(2) as i32;
            let c = if m % 2 == 1 { 1.0 } else { -1.0 } * 2f64.powi(m) * (a - b).powi(m - 1);
            if k % 2 == 1 {
                c * theta.sin()
            } else {
                c * (a * theta.cos() + b)
            }
        }
        // f is constant, so ad_f^k Z = ω^k Z^{(k)}
        ModelKind::Sniper => {
            let w = model.omega.powi(k as i32);
            let d = match k % 4 {
                1 => theta.sin(),
                2 => theta.cos(),
                3 => -theta.sin(),
                _ => -theta.cos(),
            };
            model.prc_scale * w * d
        }
        ModelKind::Sinusoidal => {
            let w = model.omega.powi(k as i32);
            let d = match k % 4 {
                1 => theta.cos(),
                2 => -theta.sin(),
                3 => -theta.cos(),
                _ => theta.sin(),
            };
            model.prc_scale * w * d
        }
    }
}

/// `ad_f^k Z` evaluated at the ensemble state `theta`.
pub fn bracket_eval(models: &[PhaseModel], theta: &[f64], k: u32) -> Result<Vec<f64>> {
    common_kind(models)?;
    if theta.len() != models.len() {
        return Err(Error::LengthMismatch {
            expected: models.len(),
            got: theta.len(),
        });
    }
    Ok(models.iter().zip(theta).map(|(m, &th)| bracket_component(m, th, k)).collect())
}

/// Evaluated brackets with their orders; `None` marks the drift `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketBasis {
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<Option<u32>>,
}

impl BracketBasis {
    /// `{f, Z, ad_f Z, …, ad_f^{2n} Z}`, or only the even brackets `ad_f^{2k} Z`,
    /// `k = 1..n`, at the origin for PRCs vanishing there (odd brackets are zero).
    pub fn build(models: &[PhaseModel], theta: &[f64]) -> Result<Self> {
        let kind = common_kind(models)?;
        let n = models.len();
        let at_origin = theta.iter().all(|t| (t / (2.0 * std::f64::consts::PI)).fract().abs() < 1e-15);
        let mut basis = BracketBasis {
            vectors: Vec::new(),
            labels: Vec::new(),
        };
        if at_origin && kind != ModelKind::Sinusoidal {
            for k in 1..=n as u32 {
                basis.vectors.push(bracket_eval(models, theta, 2 * k)?);
                basis.labels.push(Some(2 * k));
            }
            return Ok(basis);
        }
        basis.vectors.push(models.iter().zip(theta).map(|(m, &t)| m.drift(t)).collect());
        basis.labels.push(None);
        for k in 0..=2 * n as u32 {
            basis.vectors.push(bracket_eval(models, theta, k)?);
            basis.labels.push(Some(k));
        }
        Ok(basis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub kind: ModelKind,
    pub n: usize,
    pub theta: Vec<f64>,
    pub rank: usize,
    pub spans: bool,
    pub singular_values: Vec<f64>,
    /// `σ_min / σ_max` of the equilibrated stack.
    pub conditioning: f64,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Numerical rank of the bracket stack at `theta`.
///
/// Rows and columns are scaled to unit max-norm first: bracket magnitudes grow like
/// `ω^k` and would otherwise hide slow neurons below the threshold.
pub fn rank_test(models: &[PhaseModel], theta: &[f64], tol: f64) -> Result<RankReport> {
    let kind = common_kind(models)?;
    let n = models.len();
    let basis = BracketBasis::build(models, theta)?;
    let cols = basis.vectors.len();
    let mut a = DMatrix::from_fn(n, cols, |i, j| basis.vectors[j][i]);
    for mut col in a.column_iter_mut() {
        let s = col.amax();
        if s > 0.0 {
            col /= s;
        }
    }
    for mut row in a.row_iter_mut() {
        let s = row.amax();
        if s > 0.0 {
            row /= s;
        }
    }
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > tol * smax && s > 0.0).count();
    let smin = sv.get(n.saturating_sub(1)).copied().unwrap_or(0.0);

    let mut warnings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (wi, wj) = (models[i].frequency_key(), models[j].frequency_key());
            if (wi - wj).abs() < CLOSE_FREQUENCY {
                warnings.push(format!(
                    "neurons {} and {} have frequencies {wi} and {wj} closer than {CLOSE_FREQUENCY}",
                    i + 1,
                    j + 1
                ));
            }
        }
    }
    let mut notes = vec![format!(
        "bracket stack truncated at order {}; the span condition involves all orders",
        basis.labels.iter().flatten().max().copied().unwrap_or(0)
    )];
    if kind == ModelKind::Theta {
        notes.push("free orbits are periodic for I > 0, so the recurrence hypothesis holds".into());
    }
    Ok(RankReport {
        kind,
        n,
        theta: theta.to_vec(),
        rank,
        spans: rank == n,
        singular_values: sv,
        conditioning: if smax > 0.0 { smin / smax } else { 0.0 },
        warnings,
        notes,
    })
}
