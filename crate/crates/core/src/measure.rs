//! Risks, the capacity proxy `p`, the correction term δ, the confidence
//! dimension and its bound probability.
//!
//! Conventions:
//! - risks are 0/1 mismatch rates;
//! - `p` is the smallest combined risk `(v1 + v2) / 2` seen along a training
//!   trajectory, so it lies in `[0, 1]`;
//! - `CD = min(1, p + δ)` with `δ = α·sqrt(ln(2 + Err) / m)`, where `m` is the
//!   number of training samples (both halves) and `Err` the final training error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correction coefficient used unless configured otherwise.
pub const DEFAULT_ALPHA: f64 = 1.0;

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::argument(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Fraction of positions where `predicted` and `reference` differ.
pub fn empirical_risk(predicted: &[usize], reference: &[usize]) -> Result<f64> {
    if predicted.len() != reference.len() {
        return Err(Error::argument(format!(
            "risk of {} predictions against {} labels",
            predicted.len(),
            reference.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::argument("risk of an empty sequence"));
    }
    let wrong = predicted.iter().zip(reference).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / predicted.len() as f64)
}

/// Risks after one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRisk {
    /// Risk of the relabelled half against its incorrect labels.
    pub v1: f64,
    /// Risk of the intact half against its correct labels.
    pub v2: f64,
}

impl EpochRisk {
    pub fn combined(&self) -> f64 {
        (self.v1 + self.v2) / 2.0
    }
}

/// Risk trajectory of one randomization-test training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub epoch_risks: Vec<EpochRisk>,
    /// Final 0/1 error against the targets the model was trained on.
    pub final_err: f64,
    /// Size of each half.
    pub m: usize,
    pub model_id: String,
    pub setting_id: String,
    pub seed: u64,
}

impl TrainRun {
    pub fn validate(&self) -> Result<()> {
        if self.epoch_risks.is_empty() {
            return Err(Error::argument("train run has no epochs"));
        }
        if self.m == 0 {
            return Err(Error::argument("train run has m = 0"));
        }
        for (e, r) in self.epoch_risks.iter().enumerate() {
            check_unit(&format!("v1 at epoch {e}"), r.v1)?;
            check_unit(&format!("v2 at epoch {e}"), r.v2)?;
        }
        check_unit("final_err", self.final_err)
    }

    /// Training samples across both halves.
    pub fn training_size(&self) -> usize {
        2 * self.m
    }
}

/// `p = min_e (v1_e + v2_e) / 2`.
pub fn estimate_p(run: &TrainRun) -> Result<f64> {
    run.validate()?;
    Ok(run
        .epoch_risks
        .iter()
        .map(EpochRisk::combined)
        .fold(f64::INFINITY, f64::min))
}

/// `δ = α·sqrt(ln(2 + err) / m)`.
pub fn correction_term(err: f64, m: usize, alpha: f64) -> Result<f64> {
    check_unit("err", err)?;
    if m == 0 {
        return Err(Error::argument("m must be at least 1"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::argument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    Ok(alpha * ((2.0 + err).ln() / m as f64).sqrt())
}

/// `CD = min(1, p + δ)`.
pub fn confidence_dimension(p: f64, delta: f64) -> Result<f64> {
    check_unit("p", p)?;
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::argument(format!("delta must be >= 0, got {delta}")));
    }
    Ok((p + delta).min(1.0))
}

/// Probability with which CD bounds generalization: `1 − (2 + err)^−4`.
pub fn bound_probability(err: f64) -> Result<f64> {
    check_unit("err", err)?;
    Ok(1.0 - (2.0 + err).powi(-4))
}

/// The same probability obtained by plugging δ into the Hoeffding tail,
/// `1 − 2·(2 + err)^(−2α²)`. It coincides with [`bound_probability`] only for
/// special `(err, α)`; it is provided for comparison.
pub fn substituted_bound_probability(err: f64, alpha: f64) -> Result<f64> {
    check_unit("err", err)?;
    Ok(1.0 - 2.0 * (2.0 + err).powf(-2.0 * alpha * alpha))
}

/// Two-sided Hoeffding floor `1 − 2·exp(−2mδ²)` for the mean of `m` bounded draws.
pub fn hoeffding_floor(m: usize, delta: f64) -> f64 {
    1.0 - 2.0 * (-2.0 * m as f64 * delta * delta).exp()
}

/// Scale constants of the VC proportionality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcScaleConfig {
    pub zeta: f64,
    pub eps: f64,
}

impl Default for VcScaleConfig {
    fn default() -> Self {
        Self { zeta: 1.0, eps: 0.0 }
    }
}

/// `ζ·exp(m·ε²/8)·p`.
pub fn vc_scale(p: f64, m: usize, cfg: VcScaleConfig) -> Result<f64> {
    check_unit("p", p)?;
    if !(cfg.zeta > 0.0 && cfg.zeta.is_finite()) {
        return Err(Error::argument(format!("zeta must be positive, got {}", cfg.zeta)));
    }
    if !(cfg.eps >= 0.0 && cfg.eps.is_finite()) {
        return Err(Error::argument(format!("eps must be finite and >= 0, got {}", cfg.eps)));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let exponent = m as f64 * cfg.eps * cfg.eps / 8.0;
    let v = cfg.zeta * exponent.exp() * p;
    if !v.is_finite() {
        return Err(Error::Range(format!(
            "vc_scale overflows: exp(m·eps²/8) with m = {m}, eps = {} exceeds f64",
            cfg.eps
        )));
    }
    Ok(v)
}

/// One model's measurement under one setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdMeasurement {
    pub p: f64,
    pub delta: f64,
    pub cd: f64,
    pub bound_prob: f64,
    pub alpha: f64,
    /// Training samples the correction term was computed with.
    pub m: usize,
    /// Training error the correction term and bound probability were computed with.
    pub err: f64,
    pub model_id: String,
    pub setting_id: String,
    pub seed: u64,
}

impl CdMeasurement {
    /// Assembles a measurement from its inputs, computing δ, CD and the bound probability.
    pub fn from_parts(
        p: f64,
        err: f64,
        m: usize,
        alpha: f64,
        model_id: impl Into<String>,
        setting_id: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        let delta = correction_term(err, m, alpha)?;
        Ok(Self {
            p,
            delta,
            cd: confidence_dimension(p, delta)?,
            bound_prob: bound_probability(err)?,
            alpha,
            m,
            err,
            model_id: model_id.into(),
            setting_id: setting_id.into(),
            seed,
        })
    }

    pub fn from_run(run: &TrainRun, alpha: f64) -> Result<Self> {
        let p = estimate_p(run)?;
        Self::from_parts(
            p,
            run.final_err,
            run.training_size(),
            alpha,
            &run.model_id,
            &run.setting_id,
            run.seed,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// The reference configuration generalizes better.
    First,
    /// The new configuration generalizes better.
    Second,
    Tie,
}

/// Relative change of two metrics when moving from a reference to a new configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceChange {
    /// Signed relative change on task A (e.g. classification accuracy).
    pub rate_a: f64,
    /// Signed relative change on task B (e.g. detection mAP).
    pub rate_b: f64,
    pub verdict: Verdict,
}

/// Relative differences closer than this count as equal.
const RATE_TIE_TOLERANCE: f64 = 1e-12;

/// `rate = (new − ref) / ref` on both tasks. The new configuration is judged
/// better generalized when its task-B change exceeds its task-A change, worse
/// when it falls short, and tied otherwise.
pub fn performance_change_rate(ref_a: f64, new_a: f64, ref_b: f64, new_b: f64) -> Result<PerformanceChange> {
    for (name, v) in [("ref_a", ref_a), ("ref_b", ref_b)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::argument(format!("{name} must be positive, got {v}")));
        }
    }
    let rate_a = (new_a - ref_a) / ref_a;
    let rate_b = (new_b - ref_b) / ref_b;
    let verdict = if (rate_b - rate_a).abs() <= RATE_TIE_TOLERANCE {
        Verdict::Tie
    } else if rate_b > rate_a {
        Verdict::Second
    } else {
        Verdict::First
    };
    Ok(PerformanceChange { rate_a, rate_b, verdict })
}
