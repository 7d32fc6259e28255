//! Noise schedules on `s ∈ [0, 1]`.
//!
//! Translations follow a variance-preserving OU process with a linear rate
//! `β(s)`; rotations follow Brownian motion on SO(3) time-changed so that the
//! IGSO3 variance at `s` is `σ_r(s)²`.

use crate::igso3::{expected_score_norm_sq, TruncationConfig};
use crate::so3::Vec3;
use crate::{Error, Result};

/// Linear `β(s) = β_min + s (β_max − β_min)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TranslationSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for TranslationSchedule {
    fn default() -> Self {
        TranslationSchedule { beta_min: 0.1, beta_max: 20.0 }
    }
}

impl TranslationSchedule {
    pub fn new(beta_min: f64, beta_max: f64) -> Result<Self> {
        if !(beta_min > 0.0 && beta_max > beta_min && beta_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "translation schedule needs 0 < beta_min < beta_max, got [{beta_min}, {beta_max}]"
            )));
        }
        Ok(TranslationSchedule { beta_min, beta_max })
    }

    pub fn beta(&self, s: f64) -> f64 {
        (1.0 - s) * self.beta_min + s * self.beta_max
    }

    /// Drift coefficient `f_x(s) = −β(s)/2`.
    pub fn drift_coeff(&self, s: f64) -> f64 {
        -0.5 * self.beta(s)
    }

    /// Diffusion coefficient `g_x(s) = √β(s)`.
    pub fn diffusion(&self, s: f64) -> f64 {
        self.beta(s).sqrt()
    }

    /// `G_x(s) = ∫₀ˢ β = s β_min + s² (β_max − β_min)/2`.
    pub fn integrated(&self, s: f64) -> f64 {
        s * self.beta_min + 0.5 * s * s * (self.beta_max - self.beta_min)
    }

    /// Mean scaling `e^{−G/2}` of the conditional marginal.
    pub fn mean_scale(&self, s: f64) -> f64 {
        (-0.5 * self.integrated(s)).exp()
    }

    /// Per-coordinate variance `1 − e^{−G}` of the conditional marginal.
    pub fn variance(&self, s: f64) -> f64 {
        -(-self.integrated(s)).exp_m1()
    }
}

/// How `σ_r` interpolates between its end points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RotationScheduleKind {
    #[default]
    Logarithmic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RotationSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub kind: RotationScheduleKind,
}

impl Default for RotationSchedule {
    fn default() -> Self {
        RotationSchedule {
            sigma_min: 0.1,
            sigma_max: 1.5,
            kind: RotationScheduleKind::Logarithmic,
        }
    }
}

impl RotationSchedule {
    pub fn new(sigma_min: f64, sigma_max: f64, kind: RotationScheduleKind) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_max > sigma_min && sigma_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "rotation schedule needs 0 < sigma_min < sigma_max, got [{sigma_min}, {sigma_max}]"
            )));
        }
        Ok(RotationSchedule { sigma_min, sigma_max, kind })
    }

    /// `σ_r(s)`. The logarithmic kind is `log(s e^{σ_max} + (1 − s) e^{σ_min})`,
    /// expanded about the nearer end point so both ends are exact.
    pub fn sigma(&self, s: f64) -> f64 {
        let (lo, hi) = (self.sigma_min, self.sigma_max);
        match self.kind {
            RotationScheduleKind::Logarithmic if s <= 0.5 => lo + (s * (hi - lo).exp_m1()).ln_1p(),
            RotationScheduleKind::Logarithmic => hi + ((1.0 - s) * (lo - hi).exp_m1()).ln_1p(),
            RotationScheduleKind::Linear => (1.0 - s) * lo + s * hi,
        }
    }

    /// `dσ_r/ds`.
    pub fn sigma_derivative(&self, s: f64) -> f64 {
        match self.kind {
            RotationScheduleKind::Logarithmic => {
                let (hi, lo) = (self.sigma_max.exp(), self.sigma_min.exp());
                (hi - lo) / (s * hi + (1.0 - s) * lo)
            }
            RotationScheduleKind::Linear => self.sigma_max - self.sigma_min,
        }
    }

    /// IGSO3 time of the conditional marginal at `s`, `σ_r(s)²`.
    pub fn variance(&self, s: f64) -> f64 {
        self.sigma(s).powi(2)
    }

    /// `g_r(s) = √(d σ_r²/ds) = √(2 σ_r σ_r′)`.
    pub fn diffusion(&self, s: f64) -> f64 {
        (2.0 * self.sigma(s) * self.sigma_derivative(s)).sqrt()
    }
}

/// Both schedules together.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Schedules {
    pub translation: TranslationSchedule,
    pub rotation: RotationSchedule,
}

/// Conditional Gaussian marginal of one translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransMarginal {
    pub mean: Vec3,
    pub variance: f64,
}

/// `p_{s|0}(· | x0) = N(e^{−G(s)/2} x0, (1 − e^{−G(s)}) I)`.
pub fn trans_marginal(x0: &Vec3, s: f64, ts: &TranslationSchedule) -> TransMarginal {
    TransMarginal {
        mean: x0 * ts.mean_scale(s),
        variance: ts.variance(s),
    }
}

/// `∇_{xt} log p_{s|0}(xt | x0) = −(xt − e^{−G/2} x0)/(1 − e^{−G})`.
pub fn trans_conditional_score(x0: &Vec3, xt: &Vec3, s: f64, ts: &TranslationSchedule) -> Vec3 {
    -(xt - x0 * ts.mean_scale(s)) / ts.variance(s)
}

/// Inverts [`trans_conditional_score`]: the `x0` that yields `score` at `xt`.
pub fn denoised_from_trans_score(score: &Vec3, xt: &Vec3, s: f64, ts: &TranslationSchedule) -> Vec3 {
    (xt + score * ts.variance(s)) / ts.mean_scale(s)
}

/// Denoising score-matching weights at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsmWeights {
    /// `1 / E‖∇ log p_{t|0}‖²` for rotations at IGSO3 time `σ_r(t)²`.
    pub rotation: f64,
    /// `(1 − e^{−G(t)}) / e^{−G(t)/2}`.
    pub translation: f64,
}

pub fn dsm_weights(t: f64, schedules: &Schedules, cfg: &TruncationConfig) -> Result<DsmWeights> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidInput(format!("DSM weights need t in (0, 1], got {t}")));
    }
    let rot_norm = expected_score_norm_sq(schedules.rotation.variance(t), cfg)?;
    Ok(DsmWeights {
        rotation: 1.0 / rot_norm,
        translation: translation_weight(schedules.translation.integrated(t)),
    })
}

/// `(1 − e^{−G}) / e^{−G/2}` for an integrated rate `G`.
pub fn translation_weight(g: f64) -> f64 {
    -(-g).exp_m1() / (-0.5 * g).exp()
}
