// SPDX-License-Identifier: MIT OR Apache-2.0

//! Beta gate: alignment score to steering strength.
//!
//! ```text
//! alpha = softplus( k s + c)
//! beta  = softplus(-k s + c)
//! g     = clamp(alpha / (alpha + beta), g_min, g_max)
//! v     = alpha_max * g * dir          (rescaled to norm tau if it exceeds it)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Result, RudderError};
use crate::numerics::{norm, sigmoid, softplus, RealVector};

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    /// Sensitivity.
    pub k: f64,
    /// Concentration.
    pub c: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub alpha_max: f64,
    /// Optional per-token norm cap on the steering vector.
    pub tau: Option<f64>,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            k: 5.0,
            c: 1.0,
            g_min: 0.0,
            g_max: 1.0,
            alpha_max: 20.0,
            tau: None,
        }
    }
}

impl GateConfig {
    /// Checks production invariants. A flat gate (`k == 0`) is rejected here;
    /// the gate functions themselves accept it so tests can use it.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RudderError::InvalidConfig(msg));
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad(format!("gate.k must be positive, got {}", self.k));
        }
        if !self.c.is_finite() {
            return bad("gate.c must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.g_min) || !(0.0..=1.0).contains(&self.g_max) {
            return bad("gate.g_min and gate.g_max must lie in [0, 1]".into());
        }
        if self.g_min > self.g_max {
            return bad(format!(
                "gate.g_min ({}) exceeds gate.g_max ({})",
                self.g_min, self.g_max
            ));
        }
        if !(self.alpha_max >= 0.0 && self.alpha_max.is_finite()) {
            return bad(format!("gate.alpha_max must be non-negative, got {}", self.alpha_max));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return bad(format!("gate.tau must be positive, got {tau}"));
            }
        }
        Ok(())
    }
}

/// One evaluation of the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOutput {
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub g_raw: f64,
    pub g: f64,
}

/// Evaluate the gate. `s` is clipped to `[-1, 1]` first.
pub fn gate_value(s: f64, cfg: &GateConfig) -> GateOutput {
    let s = s.clamp(-1.0, 1.0);
    let alpha = softplus(cfg.k * s + cfg.c);
    let beta = softplus(-cfg.k * s + cfg.c);
    let g_raw = alpha / (alpha + beta);
    GateOutput {
        s,
        alpha,
        beta,
        g_raw,
        g: g_raw.clamp(cfg.g_min, cfg.g_max),
    }
}

/// d g_raw / d s at s = 0: k * sigmoid(c) / (2 * softplus(c)).
pub fn gate_slope_at_zero(cfg: &GateConfig) -> f64 {
    cfg.k * sigmoid(cfg.c) / (2.0 * softplus(cfg.c))
}

/// Scalar multiplier applied to the unit direction for gate value `g`,
/// with the norm cap folded in.
pub fn steering_scale(g: f64, cfg: &GateConfig, direction_norm: f64) -> f64 {
    let scale = cfg.alpha_max * g;
    match cfg.tau {
        Some(tau) if scale * direction_norm > tau => tau / direction_norm,
        _ => scale,
    }
}

pub(crate) fn check_unit(direction: &[f64]) -> Result<f64> {
    let n = norm(direction);
    if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(RudderError::NonUnitDirection { norm: n });
    }
    Ok(n)
}

/// Steering vector `alpha_max * g * direction`, capped at `tau`.
pub fn steering_strength(g: f64, cfg: &GateConfig, direction: &[f64]) -> Result<RealVector> {
    let n = check_unit(direction)?;
    let scale = steering_scale(g, cfg, n);
    RealVector::new(direction.iter().map(|x| scale * x).collect())
}
