// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::SteerMode;
use crate::card::CardVector;
use crate::gate::GateOutput;
use crate::model::{ForwardCounter, TokenId};

/// One position of a generation. For decode records `position` is the
/// position of the token fed to the model and `token_id` is the token it
/// produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub position: usize,
    pub token_id: TokenId,
    pub s: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub g_raw: Option<f64>,
    pub g: Option<f64>,
    pub steer_norm: f64,
    pub in_answer_span: bool,
}

impl TokenRecord {
    pub(crate) fn unsteered(position: usize, token_id: TokenId, in_answer_span: bool) -> Self {
        Self {
            position,
            token_id,
            s: None,
            alpha: None,
            beta: None,
            g_raw: None,
            g: None,
            steer_norm: 0.0,
            in_answer_span,
        }
    }

    pub(crate) fn set_gate(&mut self, out: &GateOutput) {
        self.s = Some(out.s);
        self.alpha = Some(out.alpha);
        self.beta = Some(out.beta);
        self.g_raw = Some(out.g_raw);
        self.g = Some(out.g);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTrace {
    pub mode: SteerMode,
    pub prompt_len: usize,
    /// Prefill positions first (never in the answer span), then one record
    /// per generated token.
    pub records: Vec<TokenRecord>,
    pub forward_counter: ForwardCounter,
    /// Decode forwards issued; equals the number of generated tokens except
    /// when a beam search finishes on a shorter hypothesis.
    pub decode_steps: usize,
    pub card: Option<CardVector>,
    /// Wall-clock time of each decode step.
    pub timing_ns: Vec<u64>,
    /// Logits of each decode step of the returned sequence, when requested.
    pub logits: Option<Vec<Vec<f64>>>,
}

/// Provenance written at the top of every exported trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub config_hash: String,
    pub seed: u64,
    pub engine_version: String,
}

impl GenerationTrace {
    pub fn answer_records(&self) -> impl Iterator<Item = &TokenRecord> {
        self.records.iter().filter(|r| r.in_answer_span)
    }

    /// Mean gate value over the answer span, if any step was gated.
    pub fn mean_gate(&self) -> Option<f64> {
        let gs: Vec<f64> = self.answer_records().filter_map(|r| r.g).collect();
        (!gs.is_empty()).then(|| crate::numerics::kahan_sum(gs.iter().copied()) / gs.len() as f64)
    }

    /// JSON lines: a header object followed by one object per record.
    /// Wall-clock timing is not exported.
    pub fn to_jsonl(&self, header: &TraceHeader) -> String {
        #[derive(Serialize)]
        struct CardMeta {
            layer: usize,
            pool_mode: crate::numerics::PoolMode,
            prefill_len: usize,
        }
        #[derive(Serialize)]
        struct Head<'a> {
            #[serde(flatten)]
            header: &'a TraceHeader,
            mode: SteerMode,
            prompt_len: usize,
            decode_steps: usize,
            forward_counter: ForwardCounter,
            card: Option<CardMeta>,
        }
        let head = Head {
            header,
            mode: self.mode,
            prompt_len: self.prompt_len,
            decode_steps: self.decode_steps,
            forward_counter: self.forward_counter,
            card: self.card.as_ref().map(|c| CardMeta {
                layer: c.layer,
                pool_mode: c.pool_mode,
                prefill_len: c.prefill_len,
            }),
        };
        let mut out = serde_json::to_string(&head).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}
