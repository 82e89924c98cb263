// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-sample steering direction pooled from self-attention residual updates.
//!
//! In a pre-norm block the attention sublayer's contribution to the residual
//! stream is its output, so the updates are read straight off the
//! [`HookSite::AttnOut`] capture during prefill and no extra forward is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RudderError};
use crate::model::{CaptureHooks, Chain, ForwardCounter, HookPoint, HookSite, Hooks, KVCache, Model, TokenId};
use crate::numerics::{l2_normalize, norm, pool, PoolMode, RealVector, EPSILON};

/// Unit direction pooled from prefill residual updates at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardVector {
    pub layer: usize,
    pub pool_mode: PoolMode,
    pub prefill_len: usize,
    pub direction: RealVector,
}

/// Residual updates from attention captures. Identity for pre-norm blocks.
pub fn residual_updates(attn_captures: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    attn_captures
}

pub fn extract_card<V: AsRef<[f64]>>(updates: &[V], mode: PoolMode, layer: usize) -> Result<CardVector> {
    let pooled = match pool(updates, mode) {
        Ok(p) => p,
        Err(RudderError::ZeroNormInput { norm, .. }) => return Err(RudderError::DegenerateDirection { norm }),
        Err(e) => return Err(e),
    };
    let n = norm(&pooled);
    if !(n >= EPSILON) {
        return Err(RudderError::DegenerateDirection { norm: n });
    }
    Ok(CardVector {
        layer,
        pool_mode: mode,
        prefill_len: updates.len(),
        direction: l2_normalize(&pooled)?,
    })
}

/// Result of a prefill that also extracted the CARD direction. The cache is
/// ready for decoding.
#[derive(Debug, Clone)]
pub struct CardPrefill {
    pub card: CardVector,
    pub cache: KVCache,
    pub counter: ForwardCounter,
}

/// Which prefill positions contribute to the pool. `None` uses all of them.
pub type PositionMask<'a> = Option<&'a [usize]>;

/// Run the single prefill with a read-only hook at `layer` and pool its
/// attention outputs. `extra` observes the same pass.
pub fn prefill_with_card(
    model: &Model,
    tokens: &[TokenId],
    layer: usize,
    mode: PoolMode,
    positions: PositionMask<'_>,
    extra: &mut dyn Hooks,
) -> Result<CardPrefill> {
    let n_layers = model.config().n_layers;
    if layer >= n_layers {
        return Err(RudderError::LayerOutOfRange { layer, n_layers });
    }
    let point = HookPoint::new(layer, HookSite::AttnOut);
    let mut capture = CaptureHooks::new([point]);
    let mut cache = model.new_cache();
    let mut counter = ForwardCounter::default();
    model.prefill(&mut cache, tokens, &mut Chain(&mut capture, extra), &mut counter)?;
    let mut updates = residual_updates(capture.take(point).unwrap_or_default());
    if let Some(keep) = positions {
        updates = keep.iter().filter_map(|&i| updates.get(i).cloned()).collect();
    }
    let card = extract_card(&updates, mode, layer)?;
    Ok(CardPrefill { card, cache, counter })
}

/// Single-prefill CARD extraction; the prefill cache is discarded.
pub fn extract_card_from_prefill(
    model: &Model,
    tokens: &[TokenId],
    layer: usize,
    mode: PoolMode,
) -> Result<(CardVector, ForwardCounter)> {
    let out = prefill_with_card(model, tokens, layer, mode, None, &mut crate::model::NoHooks)?;
    Ok((out.card, out.counter))
}
