// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RudderError};
use crate::model::TokenId;
use crate::numerics::Kahan;

/// How the next token is chosen from the logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecodeStrategy {
    Greedy,
    Beam { width: usize },
    Nucleus { top_p: f64, temperature: f64, seed: u64 },
}

impl Default for DecodeStrategy {
    fn default() -> Self {
        Self::Greedy
    }
}

impl DecodeStrategy {
    pub fn beam() -> Self {
        Self::Beam { width: 5 }
    }

    pub fn nucleus(seed: u64) -> Self {
        Self::Nucleus {
            top_p: 0.9,
            temperature: 1.0,
            seed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::Beam { .. } => "beam",
            Self::Nucleus { .. } => "nucleus",
        }
    }

    /// Same strategy with the sampling seed replaced; other kinds are unchanged.
    pub fn reseeded(&self, seed: u64) -> Self {
        match *self {
            Self::Nucleus { top_p, temperature, .. } => Self::Nucleus {
                top_p,
                temperature,
                seed,
            },
            ref other => other.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Greedy => Ok(()),
            Self::Beam { width } if width >= 1 => Ok(()),
            Self::Beam { width } => Err(RudderError::InvalidConfig(format!(
                "strategy.width must be at least 1, got {width}"
            ))),
            Self::Nucleus { top_p, temperature, .. } => {
                if !(top_p > 0.0 && top_p <= 1.0) {
                    return Err(RudderError::InvalidConfig(format!(
                        "strategy.top_p must lie in (0, 1], got {top_p}"
                    )));
                }
                if !(temperature > 0.0 && temperature.is_finite()) {
                    return Err(RudderError::InvalidConfig(format!(
                        "strategy.temperature must be positive, got {temperature}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> TokenId {
    let mut best = 0;
    for (i, &x) in logits.iter().enumerate().skip(1) {
        if x > logits[best] {
            best = i;
        }
    }
    best as TokenId
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = Kahan::new();
    for &x in logits {
        z.add((x - max).exp());
    }
    let lse = max + z.total().ln();
    logits.iter().map(|x| x - lse).collect()
}

/// Sample from the smallest high-probability prefix whose mass reaches `top_p`.
pub fn nucleus_sample<R: Rng>(logits: &[f64], top_p: f64, temperature: f64, rng: &mut R) -> TokenId {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|x| ((x - max) / temperature).exp()).collect();
    let mut z = Kahan::new();
    weights.iter().for_each(|&w| z.add(w));
    let z = z.total();

    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));

    let mut kept = 0;
    let mut mass = Kahan::new();
    for &i in &order {
        mass.add(weights[i] / z);
        kept += 1;
        if mass.total() >= top_p {
            break;
        }
    }
    let nucleus = &order[..kept];
    let mut total = Kahan::new();
    nucleus.iter().for_each(|&i| total.add(weights[i]));
    let target = rng.gen::<f64>() * total.total();
    let mut acc = Kahan::new();
    for &i in nucleus {
        acc.add(weights[i]);
        if acc.total() > target {
            return i as TokenId;
        }
    }
    nucleus[kept - 1] as TokenId
}
