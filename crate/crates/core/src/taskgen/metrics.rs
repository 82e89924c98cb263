// SPDX-License-Identifier: MIT OR Apache-2.0

//! CHAIR-style caption metrics over object-token mentions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{TaskConfig, ToyScene};
use crate::model::TokenId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionJudgment {
    pub mentioned: BTreeSet<TokenId>,
    pub hallucinated: BTreeSet<TokenId>,
    pub recalled: BTreeSet<TokenId>,
    pub n_present: usize,
}

impl CaptionJudgment {
    /// Build from mention and ground-truth sets.
    pub fn from_sets(mentioned: BTreeSet<TokenId>, present: &BTreeSet<TokenId>) -> Self {
        let hallucinated = mentioned.difference(present).copied().collect();
        let recalled = mentioned.intersection(present).copied().collect();
        Self {
            mentioned,
            hallucinated,
            recalled,
            n_present: present.len(),
        }
    }
}

/// Object tokens in `generated`, compared against the scene. Duplicate
/// mentions collapse.
pub fn judge_caption(generated: &[TokenId], scene: &ToyScene, task: &TaskConfig) -> CaptionJudgment {
    let mentioned = generated.iter().copied().filter(|&t| task.is_object(t)).collect();
    CaptionJudgment::from_sets(mentioned, &scene.present_objects)
}

/// Aggregate caption metrics. The integer counts are exact; the ratios are
/// their correctly rounded quotients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub chair_s: f64,
    pub chair_i: f64,
    /// Mean over captions of |recalled| / |present|.
    pub recall: f64,
    /// Steered recall over the paired vanilla recall, when a baseline is given.
    pub recall_ratio: Option<f64>,
    pub n_captions: usize,
    pub n_hallucinated_captions: usize,
    pub n_mentioned: usize,
    pub n_hallucinated: usize,
    /// Recall as an exact fraction.
    pub recall_num: u64,
    pub recall_den: u64,
    pub judgments: Vec<CaptionJudgment>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate(judgments: &[CaptionJudgment]) -> EvalReport {
    let n = judgments.len();
    let n_hallucinated_captions = judgments.iter().filter(|j| !j.hallucinated.is_empty()).count();
    let n_mentioned: usize = judgments.iter().map(|j| j.mentioned.len()).sum();
    let n_hallucinated: usize = judgments.iter().map(|j| j.hallucinated.len()).sum();

    // Sum of per-caption fractions kept exact; a caption with nothing to
    // recall counts as fully recalled.
    let (mut num, mut den) = (0u64, 1u64);
    for j in judgments {
        let (a, b) = if j.n_present == 0 {
            (1, 1)
        } else {
            (j.recalled.len() as u64, j.n_present as u64)
        };
        let g = gcd(den, b);
        num = num * (b / g) + a * (den / g);
        den = den / g * b;
        let r = gcd(num, den).max(1);
        num /= r;
        den /= r;
    }
    let (recall_num, recall_den) = if n == 0 {
        (0, 1)
    } else {
        let denom = den * n as u64;
        let r = gcd(num, denom).max(1);
        (num / r, denom / r)
    };

    EvalReport {
        chair_s: ratio(n_hallucinated_captions, n),
        chair_i: ratio(n_hallucinated, n_mentioned),
        recall: recall_num as f64 / recall_den as f64,
        recall_ratio: None,
        n_captions: n,
        n_hallucinated_captions,
        n_mentioned,
        n_hallucinated,
        recall_num,
        recall_den,
        judgments: judgments.to_vec(),
    }
}

impl EvalReport {
    /// Attach the recall ratio against a vanilla run on the same scenes.
    pub fn with_baseline(mut self, vanilla: &EvalReport) -> Self {
        self.recall_ratio = (vanilla.recall > 0.0).then(|| self.recall / vanilla.recall);
        self
    }
}
