// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steered generation.
//!
//! A prompt `p[0..P]` is processed as one prefill over `p[..P-1]` (which also
//! yields the CARD direction) followed by decode steps. The first decode step
//! feeds `p[P-1]`, so every generated token comes out of a decode step and
//! every decode step is in the answer span. Prefill positions are never
//! steered.

mod decode;
mod hook;
mod trace;

use std::cell::RefCell;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use decode::{argmax, log_softmax, nucleus_sample, DecodeStrategy};
pub use trace::{GenerationTrace, TokenRecord, TraceHeader};

use crate::card::{prefill_with_card, CardVector};
use crate::error::{Result, RudderError};
use crate::gate::{check_unit, GateConfig};
use crate::model::{Chain, DecodeItem, ForwardCounter, Hooks, KVCache, Model, ModelConfig, NoHooks, TokenId};
use crate::numerics::PoolMode;
use hook::{SharedObserver, SteerHook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteerMode {
    #[default]
    Off,
    /// Gated CARD injection.
    RudderBeta,
    /// Constant-strength CARD injection at `alpha_max`.
    RudderAdd,
    /// Two-cache contrastive decoding against a token-dropped prompt.
    ContrastiveTwoPass,
}

impl SteerMode {
    pub const ALL: [SteerMode; 4] = [Self::Off, Self::RudderBeta, Self::RudderAdd, Self::ContrastiveTwoPass];

    pub fn name(self) -> &'static str {
        match self {
            Self::Off => "off",
            Self::RudderBeta => "rudder_beta",
            Self::RudderAdd => "rudder_add",
            Self::ContrastiveTwoPass => "contrastive_two_pass",
        }
    }

    fn uses_card(self) -> bool {
        matches!(self, Self::RudderBeta | Self::RudderAdd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteerConfig {
    pub mode: SteerMode,
    pub layer: usize,
    pub gate: GateConfig,
    pub pool_mode: PoolMode,
    pub contrastive_lambda: f64,
    /// Replacement token for the contrastive baseline's perturbed prompt.
    pub noise_token: TokenId,
    /// Prefill positions pooled into the CARD; all of them when unset.
    pub card_positions: Option<Vec<usize>>,
}

impl Default for SteerConfig {
    fn default() -> Self {
        Self {
            mode: SteerMode::Off,
            layer: 0,
            gate: GateConfig::default(),
            pool_mode: PoolMode::Mean,
            contrastive_lambda: 1.0,
            noise_token: 0,
            card_positions: None,
        }
    }
}

impl SteerConfig {
    pub fn with_mode(&self, mode: SteerMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        if self.layer >= model.n_layers {
            return Err(RudderError::LayerOutOfRange {
                layer: self.layer,
                n_layers: model.n_layers,
            });
        }
        match self.mode {
            SteerMode::RudderBeta => self.gate.validate()?,
            SteerMode::RudderAdd => {
                // The constant-strength ablation ignores k, c and the clamp.
                let g = GateConfig {
                    k: 1.0,
                    c: 0.0,
                    g_min: 0.0,
                    g_max: 1.0,
                    ..self.gate.clone()
                };
                g.validate()?;
            }
            SteerMode::ContrastiveTwoPass => {
                if !self.contrastive_lambda.is_finite() {
                    return Err(RudderError::InvalidConfig(
                        "steer.contrastive_lambda must be finite".into(),
                    ));
                }
                if self.noise_token as usize >= model.vocab_size {
                    return Err(RudderError::TokenOutOfRange {
                        id: self.noise_token,
                        vocab: model.vocab_size,
                    });
                }
            }
            SteerMode::Off => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateOptions {
    pub max_new_tokens: usize,
    #[serde(default)]
    pub stop_token: Option<TokenId>,
    /// Keep the full logits vector of every decode step in the trace.
    #[serde(default)]
    pub record_logits: bool,
}

impl GenerateOptions {
    pub fn new(max_new_tokens: usize) -> Self {
        Self {
            max_new_tokens,
            stop_token: None,
            record_logits: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generation {
    /// Generated tokens, excluding the prompt.
    pub tokens: Vec<TokenId>,
    pub trace: GenerationTrace,
}

/// Every odd-index prompt token replaced by `noise`.
pub fn perturb_prompt(prompt: &[TokenId], noise: TokenId) -> Vec<TokenId> {
    prompt
        .iter()
        .enumerate()
        .map(|(i, &t)| if i % 2 == 1 { noise } else { t })
        .collect()
}

pub fn generate(
    model: &Model,
    prompt: &[TokenId],
    steer: &SteerConfig,
    strategy: &DecodeStrategy,
    opts: &GenerateOptions,
) -> Result<Generation> {
    generate_observed(model, prompt, steer, strategy, opts, &mut NoHooks)
}

/// Two-cache contrastive decoding: `logits = main - lambda * perturbed`.
pub fn generate_contrastive(
    model: &Model,
    prompt: &[TokenId],
    perturbed: &[TokenId],
    lambda: f64,
    strategy: &DecodeStrategy,
    opts: &GenerateOptions,
) -> Result<Generation> {
    let steer = SteerConfig {
        mode: SteerMode::ContrastiveTwoPass,
        contrastive_lambda: lambda,
        ..SteerConfig::default()
    };
    run(model, prompt, Some(perturbed), &steer, strategy, opts, &mut NoHooks)
}

/// [`generate`] with a read-only observer attached to the prefill and every
/// decode forward of the main context. Write requests from the observer are
/// ignored.
pub fn generate_observed(
    model: &Model,
    prompt: &[TokenId],
    steer: &SteerConfig,
    strategy: &DecodeStrategy,
    opts: &GenerateOptions,
    observer: &mut dyn Hooks,
) -> Result<Generation> {
    let perturbed = (steer.mode == SteerMode::ContrastiveTwoPass).then(|| perturb_prompt(prompt, steer.noise_token));
    run(model, prompt, perturbed.as_deref(), steer, strategy, opts, observer)
}

#[derive(Clone)]
struct Hyp {
    tokens: Vec<TokenId>,
    score: f64,
    last: TokenId,
    cache: KVCache,
    aux: Option<(KVCache, TokenId)>,
    records: Vec<TokenRecord>,
    logits: Vec<Vec<f64>>,
}

struct StepOut {
    logits: Vec<f64>,
    record: TokenRecord,
}

struct Session<'m> {
    model: &'m Model,
    steer: &'m SteerConfig,
    card: Option<CardVector>,
    dir_norm: f64,
    counter: ForwardCounter,
}

impl Session<'_> {
    /// One decode forward for every live hypothesis (plus one for the
    /// perturbed caches in contrastive mode).
    fn step(&mut self, hyps: &mut [Hyp], observer: &RefCell<&mut dyn Hooks>) -> Result<Vec<StepOut>> {
        let steer = self.steer;
        let direction: &[f64] = self.card.as_ref().map_or(&[], |c| c.direction.as_slice());
        let mut steer_hooks: Vec<Option<SteerHook<'_>>> = hyps
            .iter()
            .map(|_| {
                steer.mode.uses_card().then(|| {
                    SteerHook::new(
                        steer.layer,
                        steer.mode == SteerMode::RudderBeta,
                        &steer.gate,
                        direction,
                        self.dir_norm,
                    )
                })
            })
            .collect();
        let mut observers: Vec<SharedObserver<'_, '_>> = hyps.iter().map(|_| SharedObserver(observer)).collect();
        let mut no_hooks: Vec<NoHooks> = vec![NoHooks; hyps.len()];
        let mut chains: Vec<Chain<'_, '_>> = steer_hooks
            .iter_mut()
            .zip(observers.iter_mut())
            .zip(no_hooks.iter_mut())
            .map(|((s, o), n)| match s {
                Some(s) => Chain(s, o),
                None => Chain(n, o),
            })
            .collect();
        let positions: Vec<usize> = hyps.iter().map(|h| h.cache.filled_len()).collect();
        let mut items: Vec<DecodeItem<'_>> = hyps
            .iter_mut()
            .zip(chains.iter_mut())
            .map(|(h, c)| DecodeItem {
                cache: &mut h.cache,
                token: h.last,
                hooks: c,
            })
            .collect();
        let mut logits = self.model.decode_batch(&mut items, &mut self.counter)?;
        drop(items);
        drop(chains);

        if steer.mode == SteerMode::ContrastiveTwoPass {
            let mut none: Vec<NoHooks> = vec![NoHooks; hyps.len()];
            let mut items: Vec<DecodeItem<'_>> = hyps
                .iter_mut()
                .zip(none.iter_mut())
                .map(|(h, n)| {
                    let (cache, token) = h.aux.as_mut().expect("contrastive hypotheses carry a second cache");
                    DecodeItem {
                        cache,
                        token: *token,
                        hooks: n,
                    }
                })
                .collect();
            let aux = self.model.decode_batch(&mut items, &mut self.counter)?;
            let lambda = steer.contrastive_lambda;
            for (main, pert) in logits.iter_mut().zip(aux) {
                for (m, p) in main.iter_mut().zip(pert) {
                    *m -= lambda * p;
                }
            }
        }

        Ok(logits
            .into_iter()
            .zip(steer_hooks)
            .zip(positions)
            .map(|((logits, hook), position)| {
                let mut record = TokenRecord::unsteered(position, 0, true);
                if let Some(h) = hook {
                    record.steer_norm = h.steer_norm;
                    match h.gate {
                        Some(g) => record.set_gate(&g),
                        None => record.g = Some(1.0),
                    }
                }
                StepOut { logits, record }
            })
            .collect())
    }
}

fn advance(hyp: &mut Hyp, out: &StepOut, token: TokenId, logprob: f64, record_logits: bool) {
    let mut record = out.record.clone();
    record.token_id = token;
    hyp.records.push(record);
    hyp.tokens.push(token);
    hyp.score += logprob;
    hyp.last = token;
    if let Some((_, aux_last)) = hyp.aux.as_mut() {
        *aux_last = token;
    }
    if record_logits {
        hyp.logits.push(out.logits.clone());
    }
}

fn run(
    model: &Model,
    prompt: &[TokenId],
    perturbed: Option<&[TokenId]>,
    steer: &SteerConfig,
    strategy: &DecodeStrategy,
    opts: &GenerateOptions,
    observer: &mut dyn Hooks,
) -> Result<Generation> {
    let cfg = model.config();
    steer.validate(cfg)?;
    strategy.validate()?;
    if prompt.len() < 2 {
        return Err(RudderError::PromptTooShort(prompt.len()));
    }
    if prompt.len() + opts.max_new_tokens > cfg.max_seq_len {
        return Err(RudderError::SpanExceedsContext {
            prompt: prompt.len(),
            new_tokens: opts.max_new_tokens,
            max: cfg.max_seq_len,
        });
    }
    if let Some(p) = perturbed {
        if p.len() != prompt.len() {
            return Err(RudderError::DimMismatch {
                expected: prompt.len(),
                got: p.len(),
            });
        }
    }

    let observer: RefCell<&mut dyn Hooks> = RefCell::new(observer);
    let context = &prompt[..prompt.len() - 1];
    let last = prompt[prompt.len() - 1];

    let (card, cache, mut counter) = if steer.mode.uses_card() {
        let out = prefill_with_card(
            model,
            context,
            steer.layer,
            steer.pool_mode,
            steer.card_positions.as_deref(),
            &mut SharedObserver(&observer),
        )?;
        (Some(out.card), out.cache, out.counter)
    } else {
        let mut cache = model.new_cache();
        let mut counter = ForwardCounter::default();
        model.prefill(&mut cache, context, &mut SharedObserver(&observer), &mut counter)?;
        (None, cache, counter)
    };
    let aux = match (steer.mode, perturbed) {
        (SteerMode::ContrastiveTwoPass, Some(p)) => {
            let mut aux_cache = model.new_cache();
            model.prefill(&mut aux_cache, &p[..p.len() - 1], &mut NoHooks, &mut counter)?;
            Some((aux_cache, p[p.len() - 1]))
        }
        (SteerMode::ContrastiveTwoPass, None) => unreachable!("contrastive runs always carry a perturbed prompt"),
        _ => None,
    };
    let dir_norm = match &card {
        Some(c) => check_unit(&c.direction)?,
        None => 1.0,
    };

    let mut session = Session {
        model,
        steer,
        card,
        dir_norm,
        counter,
    };
    let mut live = vec![Hyp {
        tokens: Vec::new(),
        score: 0.0,
        last,
        cache,
        aux,
        records: Vec::new(),
        logits: Vec::new(),
    }];
    let mut finished: Vec<Hyp> = Vec::new();
    let mut timing_ns = Vec::with_capacity(opts.max_new_tokens);
    let mut rng = match strategy {
        DecodeStrategy::Nucleus { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };
    let is_stop = |t: TokenId| opts.stop_token == Some(t);

    for _ in 0..opts.max_new_tokens {
        if live.is_empty() {
            break;
        }
        let start = Instant::now();
        let outs = session.step(&mut live, &observer)?;
        match strategy {
            DecodeStrategy::Greedy | DecodeStrategy::Nucleus { .. } => {
                let out = &outs[0];
                let token = match (strategy, rng.as_mut()) {
                    (DecodeStrategy::Nucleus { top_p, temperature, .. }, Some(rng)) => {
                        nucleus_sample(&out.logits, *top_p, *temperature, rng)
                    }
                    _ => argmax(&out.logits),
                };
                advance(&mut live[0], out, token, 0.0, opts.record_logits);
                if is_stop(token) {
                    finished.push(live.pop().expect("one live hypothesis"));
                }
            }
            DecodeStrategy::Beam { width } => {
                live = expand_beams(live, &outs, *width, &mut finished, &is_stop, opts.record_logits);
                let best_live = live.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
                let best_done = finished.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
                // Scores only decrease with length, so no live beam can overtake.
                if !finished.is_empty() && best_done >= best_live {
                    live.clear();
                }
            }
        }
        timing_ns.push(start.elapsed().as_nanos() as u64);
    }

    let winner = finished
        .into_iter()
        .chain(live)
        .reduce(|best, h| if h.score > best.score { h } else { best })
        .expect("at least one hypothesis");

    let mut records: Vec<TokenRecord> = context
        .iter()
        .enumerate()
        .map(|(i, &t)| TokenRecord::unsteered(i, t, false))
        .collect();
    records.extend(winner.records);
    let decode_steps = timing_ns.len();
    let trace = GenerationTrace {
        mode: steer.mode,
        prompt_len: prompt.len(),
        records,
        forward_counter: session.counter,
        decode_steps,
        card: session.card,
        timing_ns,
        logits: opts.record_logits.then_some(winner.logits),
    };
    Ok(Generation {
        tokens: winner.tokens,
        trace,
    })
}

fn expand_beams(
    live: Vec<Hyp>,
    outs: &[StepOut],
    width: usize,
    finished: &mut Vec<Hyp>,
    is_stop: &dyn Fn(TokenId) -> bool,
    record_logits: bool,
) -> Vec<Hyp> {
    let mut cands: Vec<(f64, f64, usize, TokenId, f64)> = Vec::new();
    for (b, out) in outs.iter().enumerate() {
        for (v, lp) in log_softmax(&out.logits).into_iter().enumerate() {
            cands.push((live[b].score + lp, out.logits[v], b, v as TokenId, lp));
        }
    }
    // Higher score first; equal scores fall back to the raw logit, then to
    // the lower beam index and token id.
    cands.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut next = Vec::with_capacity(width);
    for (_, _, b, token, lp) in cands {
        if next.len() == width {
            break;
        }
        let stop = is_stop(token);
        if stop && finished.len() >= width {
            continue;
        }
        let mut child = live[b].clone();
        advance(&mut child, &outs[b], token, lp, record_logits);
        if stop {
            finished.push(child);
        } else {
            next.push(child);
        }
    }
    next
}

#[cfg(test)]
mod tests;
