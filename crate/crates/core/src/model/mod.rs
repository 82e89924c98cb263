// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small pre-norm transformer decoder with a KV cache and residual-stream hooks.
//!
//! Generation runs in two stages: [`Model::prefill`] processes the context in
//! one parallel pass and populates the cache, then [`Model::decode_step`] (or
//! [`Model::decode_batch`] for beam hypotheses) advances one position per call.
//! Every call increments a [`ForwardCounter`] by exactly one.

mod cache;
pub mod checkpoint;
mod config;
mod hooks;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::KVCache;
pub use config::ModelConfig;
pub use hooks::{AddVectorHook, CaptureHooks, Chain, HookPoint, HookSite, Hooks, NoHooks};

use crate::error::{Result, RudderError};
use crate::numerics::{dot, kahan_sum, Kahan};

pub type TokenId = u32;

const LAYER_NORM_EPS: f64 = 1e-5;

/// Forward invocations issued during one generation session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardCounter {
    pub prefill_calls: u64,
    pub decode_calls: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerNorm {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerNorm {
    fn identity(dim: usize) -> Self {
        Self {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len() as f64;
        let mean = kahan_sum(x.iter().copied()) / n;
        let var = kahan_sum(x.iter().map(|v| (v - mean) * (v - mean))) / n;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for i in 0..x.len() {
            out[i] = (x[i] - mean) * inv * self.gain[i] + self.bias[i];
        }
    }
}

/// Dense layer, weight stored `[out_dim, in_dim]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Linear {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    #[inline]
    pub(crate) fn row(&self, o: usize) -> &[f64] {
        &self.weight[o * self.in_dim..(o + 1) * self.in_dim]
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for o in 0..self.out_dim {
            out[o] = dot(self.row(o), x) + self.bias[o];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub ln1: LayerNorm,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) config: ModelConfig,
    /// `[vocab_size, d_model]`
    pub(crate) tok_emb: Vec<f64>,
    /// `[max_seq_len, d_model]`
    pub(crate) pos_emb: Vec<f64>,
    pub(crate) blocks: Vec<Block>,
    pub(crate) ln_f: LayerNorm,
    /// Separate unembedding, present only when embeddings are untied.
    pub(crate) unembed: Option<Vec<f64>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LogitsFor {
    None,
    Last,
    All,
}

/// One hypothesis advanced by [`Model::decode_batch`].
pub struct DecodeItem<'a> {
    pub cache: &'a mut KVCache,
    pub token: TokenId,
    pub hooks: &'a mut dyn Hooks,
}

/// Deterministic generator for one named parameter tensor.
fn param_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

fn fill_normal(buf: &mut [f64], seed: u64, name: &str, std: f64) {
    let mut rng = param_rng(seed, name);
    let dist = Normal::new(0.0, std).expect("std is positive");
    for x in buf.iter_mut() {
        *x = dist.sample(&mut rng);
    }
}

#[inline]
fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

impl Model {
    /// Model with zero projections and identity layer norms.
    pub(crate) fn zeroed(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let blocks = (0..config.n_layers)
            .map(|_| Block {
                ln1: LayerNorm::identity(d),
                q: Linear::zeros(d, d),
                k: Linear::zeros(d, d),
                v: Linear::zeros(d, d),
                o: Linear::zeros(d, d),
                ln2: LayerNorm::identity(d),
                fc1: Linear::zeros(d, config.d_ff),
                fc2: Linear::zeros(config.d_ff, d),
            })
            .collect();
        Ok(Self {
            tok_emb: vec![0.0; config.vocab_size * d],
            pos_emb: vec![0.0; config.max_seq_len * d],
            blocks,
            ln_f: LayerNorm::identity(d),
            unembed: (!config.tied_embeddings).then(|| vec![0.0; config.vocab_size * d]),
            config,
        })
    }

    /// Seeded initialization: embeddings ~ N(0, 0.02), projection weights
    /// ~ N(0, 0.02 / sqrt(n_layers)), biases zero, layer norms identity.
    pub fn init(config: ModelConfig) -> Result<Self> {
        let mut model = Self::zeroed(config)?;
        let seed = model.config.seed;
        let proj_std = 0.02 / (model.config.n_layers as f64).sqrt();
        for (name, tensor) in model.named_params_mut() {
            if name == "tok_emb" || name == "pos_emb" || name == "unembed" {
                fill_normal(tensor, seed, &name, 0.02);
            } else if name.ends_with(".weight") {
                fill_normal(tensor, seed, &name, proj_std);
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn new_cache(&self) -> KVCache {
        KVCache::new(self.config.n_layers, self.config.d_model, self.config.max_seq_len)
    }

    /// Input embedding row for `token`.
    pub fn embedding(&self, token: TokenId) -> &[f64] {
        let d = self.config.d_model;
        let t = token as usize;
        &self.tok_emb[t * d..(t + 1) * d]
    }

    /// Output (unembedding) row for `token`.
    pub fn unembedding(&self, token: TokenId) -> &[f64] {
        let d = self.config.d_model;
        let t = token as usize;
        match &self.unembed {
            Some(u) => &u[t * d..(t + 1) * d],
            None => &self.tok_emb[t * d..(t + 1) * d],
        }
    }

    /// Parameter tensors in checkpoint declaration order.
    pub fn named_params(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![("tok_emb".into(), &self.tok_emb), ("pos_emb".into(), &self.pos_emb)];
        for (l, b) in self.blocks.iter().enumerate() {
            let p = |s: &str| format!("blocks.{l}.{s}");
            out.push((p("ln1.gain"), &b.ln1.gain));
            out.push((p("ln1.bias"), &b.ln1.bias));
            for (n, lin) in [("q", &b.q), ("k", &b.k), ("v", &b.v), ("o", &b.o)] {
                out.push((p(&format!("attn.{n}.weight")), &lin.weight));
                out.push((p(&format!("attn.{n}.bias")), &lin.bias));
            }
            out.push((p("ln2.gain"), &b.ln2.gain));
            out.push((p("ln2.bias"), &b.ln2.bias));
            out.push((p("mlp.fc1.weight"), &b.fc1.weight));
            out.push((p("mlp.fc1.bias"), &b.fc1.bias));
            out.push((p("mlp.fc2.weight"), &b.fc2.weight));
            out.push((p("mlp.fc2.bias"), &b.fc2.bias));
        }
        out.push(("ln_f.gain".into(), &self.ln_f.gain));
        out.push(("ln_f.bias".into(), &self.ln_f.bias));
        if let Some(u) = &self.unembed {
            out.push(("unembed".into(), u));
        }
        out
    }

    pub(crate) fn named_params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("tok_emb".into(), &mut self.tok_emb),
            ("pos_emb".into(), &mut self.pos_emb),
        ];
        for (l, b) in self.blocks.iter_mut().enumerate() {
            let p = |s: &str| format!("blocks.{l}.{s}");
            out.push((p("ln1.gain"), &mut b.ln1.gain));
            out.push((p("ln1.bias"), &mut b.ln1.bias));
            for (n, lin) in [("q", &mut b.q), ("k", &mut b.k), ("v", &mut b.v), ("o", &mut b.o)] {
                out.push((p(&format!("attn.{n}.weight")), &mut lin.weight));
                out.push((p(&format!("attn.{n}.bias")), &mut lin.bias));
            }
            out.push((p("ln2.gain"), &mut b.ln2.gain));
            out.push((p("ln2.bias"), &mut b.ln2.bias));
            out.push((p("mlp.fc1.weight"), &mut b.fc1.weight));
            out.push((p("mlp.fc1.bias"), &mut b.fc1.bias));
            out.push((p("mlp.fc2.weight"), &mut b.fc2.weight));
            out.push((p("mlp.fc2.bias"), &mut b.fc2.bias));
        }
        out.push(("ln_f.gain".into(), &mut self.ln_f.gain));
        out.push(("ln_f.bias".into(), &mut self.ln_f.bias));
        if let Some(u) = &mut self.unembed {
            out.push(("unembed".into(), u));
        }
        out
    }

    /// Mutable access to one named parameter tensor, for building fixtures.
    pub fn param_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.named_params_mut()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn n_params(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    fn check_tokens(&self, tokens: &[TokenId]) -> Result<()> {
        let vocab = self.config.vocab_size;
        match tokens.iter().find(|&&t| t as usize >= vocab) {
            Some(&id) => Err(RudderError::TokenOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    /// Single parallel pass over the context. The cache must be empty.
    pub fn prefill(
        &self,
        cache: &mut KVCache,
        tokens: &[TokenId],
        hooks: &mut dyn Hooks,
        counter: &mut ForwardCounter,
    ) -> Result<()> {
        if tokens.is_empty() {
            return Err(RudderError::EmptySequence);
        }
        if tokens.len() > self.config.max_seq_len {
            return Err(RudderError::SequenceTooLong {
                len: tokens.len(),
                max: self.config.max_seq_len,
            });
        }
        if !cache.is_empty() {
            return Err(RudderError::CacheNotEmpty {
                filled: cache.filled_len(),
            });
        }
        self.check_tokens(tokens)?;
        self.forward_chunk(cache, tokens, hooks, LogitsFor::None)?;
        counter.prefill_calls += 1;
        Ok(())
    }

    /// Feed one token at the next cache position and return next-token logits.
    pub fn decode_step(
        &self,
        cache: &mut KVCache,
        token: TokenId,
        hooks: &mut dyn Hooks,
        counter: &mut ForwardCounter,
    ) -> Result<Vec<f64>> {
        self.check_decode(cache, token)?;
        let mut logits = self.forward_chunk(cache, &[token], hooks, LogitsFor::Last)?;
        counter.decode_calls += 1;
        Ok(logits.pop().expect("one logits row"))
    }

    /// Advance several independent hypotheses in one forward invocation.
    pub fn decode_batch(&self, items: &mut [DecodeItem<'_>], counter: &mut ForwardCounter) -> Result<Vec<Vec<f64>>> {
        for item in items.iter() {
            self.check_decode(item.cache, item.token)?;
        }
        let mut out = Vec::with_capacity(items.len());
        for item in items.iter_mut() {
            let mut logits = self.forward_chunk(item.cache, &[item.token], item.hooks, LogitsFor::Last)?;
            out.push(logits.pop().expect("one logits row"));
        }
        counter.decode_calls += 1;
        Ok(out)
    }

    fn check_decode(&self, cache: &KVCache, token: TokenId) -> Result<()> {
        if cache.filled_len() + 1 > self.config.max_seq_len {
            return Err(RudderError::CacheOverflow {
                needed: cache.filled_len() + 1,
                max: self.config.max_seq_len,
            });
        }
        self.check_tokens(&[token])
    }

    /// Logits at every position of a full causal pass over `tokens`, using a
    /// fresh cache. Not counted as a generation forward.
    pub fn forward_logits(&self, tokens: &[TokenId], hooks: &mut dyn Hooks) -> Result<Vec<Vec<f64>>> {
        if tokens.is_empty() {
            return Err(RudderError::EmptySequence);
        }
        if tokens.len() > self.config.max_seq_len {
            return Err(RudderError::SequenceTooLong {
                len: tokens.len(),
                max: self.config.max_seq_len,
            });
        }
        self.check_tokens(tokens)?;
        let mut cache = self.new_cache();
        self.forward_chunk(&mut cache, tokens, hooks, LogitsFor::All)
    }

    fn forward_chunk(
        &self,
        cache: &mut KVCache,
        tokens: &[TokenId],
        hooks: &mut dyn Hooks,
        logits_for: LogitsFor,
    ) -> Result<Vec<Vec<f64>>> {
        let cfg = &self.config;
        let d = cfg.d_model;
        let n = tokens.len();
        let start = cache.filled_len;
        if start + n > cfg.max_seq_len {
            return Err(RudderError::CacheOverflow {
                needed: start + n,
                max: cfg.max_seq_len,
            });
        }

        let mut h = vec![0.0; n * d];
        for (i, &t) in tokens.iter().enumerate() {
            let emb = self.embedding(t);
            let pos = &self.pos_emb[(start + i) * d..(start + i + 1) * d];
            for j in 0..d {
                h[i * d + j] = emb[j] + pos[j];
            }
        }

        let mut u = vec![0.0; n * d];
        let mut q = vec![0.0; n * d];
        let mut attn = vec![0.0; d];
        let mut mixed = vec![0.0; d];
        let mut delta = vec![0.0; d];
        let mut ln2 = vec![0.0; d];
        let mut ff = vec![0.0; cfg.d_ff];
        let mut ff_out = vec![0.0; d];
        let mut scores = Vec::with_capacity(start + n);
        let hd = cfg.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();

        for (l, block) in self.blocks.iter().enumerate() {
            let pre_point = HookPoint::new(l, HookSite::PreAttnLayerNormOut);
            let attn_point = HookPoint::new(l, HookSite::AttnOut);
            let read_pre = hooks.wants_read(pre_point);
            let read_attn = hooks.wants_read(attn_point);
            let write = hooks.wants_write(l);

            let mut k_row = vec![0.0; d];
            let mut v_row = vec![0.0; d];
            for i in 0..n {
                let ui = &mut u[i * d..(i + 1) * d];
                block.ln1.apply(&h[i * d..(i + 1) * d], ui);
                block.q.apply(ui, &mut q[i * d..(i + 1) * d]);
                block.k.apply(ui, &mut k_row);
                block.v.apply(ui, &mut v_row);
                cache.keys[l].extend_from_slice(&k_row);
                cache.values[l].extend_from_slice(&v_row);
            }

            for i in 0..n {
                let pos = start + i;
                if read_pre {
                    hooks.read(pre_point, pos, &u[i * d..(i + 1) * d]);
                }

                for head in 0..cfg.n_heads {
                    let off = head * hd;
                    let qh = &q[i * d + off..i * d + off + hd];
                    scores.clear();
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..=pos {
                        let kh = &cache.keys[l][j * d + off..j * d + off + hd];
                        let s = dot(qh, kh) * scale;
                        max = max.max(s);
                        scores.push(s);
                    }
                    let mut denom = Kahan::new();
                    for s in scores.iter_mut() {
                        *s = (*s - max).exp();
                        denom.add(*s);
                    }
                    let denom = denom.total();
                    for c in 0..hd {
                        let mut acc = Kahan::new();
                        for (j, w) in scores.iter().enumerate() {
                            acc.add(w * cache.values[l][j * d + off + c]);
                        }
                        mixed[off + c] = acc.total() / denom;
                    }
                }
                block.o.apply(&mixed, &mut attn);
                if read_attn {
                    hooks.read(attn_point, pos, &attn);
                }

                let hi = &mut h[i * d..(i + 1) * d];
                for j in 0..d {
                    hi[j] += attn[j];
                }
                if write {
                    delta.iter_mut().for_each(|x| *x = 0.0);
                    if hooks.residual_add(l, pos, &mut delta) {
                        for j in 0..d {
                            hi[j] += delta[j];
                        }
                    }
                }

                block.ln2.apply(hi, &mut ln2);
                block.fc1.apply(&ln2, &mut ff);
                ff.iter_mut().for_each(|x| *x = gelu(*x));
                block.fc2.apply(&ff, &mut ff_out);
                for j in 0..d {
                    hi[j] += ff_out[j];
                }
            }
        }
        cache.filled_len += n;

        let rows: Vec<usize> = match logits_for {
            LogitsFor::None => vec![],
            LogitsFor::Last => vec![n - 1],
            LogitsFor::All => (0..n).collect(),
        };
        let mut normed = vec![0.0; d];
        Ok(rows
            .into_iter()
            .map(|i| {
                self.ln_f.apply(&h[i * d..(i + 1) * d], &mut normed);
                (0..cfg.vocab_size as TokenId)
                    .map(|t| dot(&normed, self.unembedding(t)))
                    .collect()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Model {
        Model::init(ModelConfig::tiny(7)).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let a = tiny();
        let b = tiny();
        assert_eq!(a, b);
        let c = Model::init(ModelConfig::tiny(8)).unwrap();
        assert_ne!(a.tok_emb, c.tok_emb);
    }

    #[test]
    fn init_rejects_bad_config() {
        let cfg = ModelConfig {
            d_model: 8,
            n_heads: 3,
            ..ModelConfig::tiny(0)
        };
        assert!(matches!(Model::init(cfg), Err(RudderError::InvalidConfig(_))));
    }

    #[test]
    fn init_scales_match_design() {
        let cfg = ModelConfig {
            d_model: 64,
            n_layers: 4,
            vocab_size: 256,
            ..ModelConfig::tiny(3)
        };
        let m = Model::init(cfg).unwrap();
        let std = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        assert!((std(&m.tok_emb) - 0.02).abs() < 0.002);
        assert!((std(&m.blocks[0].q.weight) - 0.01).abs() < 0.001);
        assert!(m.blocks[0].q.bias.iter().all(|&b| b == 0.0));
        assert!(m.ln_f.gain.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn smoke_forward_has_finite_vocab_logits() {
        let m = Model::init(ModelConfig {
            d_model: 16,
            vocab_size: 32,
            ..ModelConfig::tiny(1)
        })
        .unwrap();
        let logits = m.forward_logits(&[1, 2, 3], &mut NoHooks).unwrap();
        assert_eq!(logits.len(), 3);
        assert!(logits
            .iter()
            .all(|row| row.len() == 32 && row.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn prefill_counts_and_fills_cache() {
        let m = tiny();
        let mut cache = m.new_cache();
        let mut counter = ForwardCounter::default();
        let tokens: Vec<TokenId> = (0..10).collect();
        m.prefill(&mut cache, &tokens, &mut NoHooks, &mut counter).unwrap();
        assert_eq!(
            counter,
            ForwardCounter {
                prefill_calls: 1,
                decode_calls: 0
            }
        );
        assert_eq!(cache.filled_len(), 10);

        assert!(matches!(
            m.prefill(&mut m.new_cache(), &[], &mut NoHooks, &mut counter),
            Err(RudderError::EmptySequence)
        ));
        assert!(matches!(
            m.prefill(&mut cache, &[1], &mut NoHooks, &mut counter),
            Err(RudderError::CacheNotEmpty { .. })
        ));
        let long = vec![0; m.config.max_seq_len + 1];
        assert!(matches!(
            m.prefill(&mut m.new_cache(), &long, &mut NoHooks, &mut counter),
            Err(RudderError::SequenceTooLong { .. })
        ));
    }

    #[test]
    fn attn_captures_cover_every_prefill_token() {
        let m = tiny();
        let points = (0..2).map(|l| HookPoint::new(l, HookSite::AttnOut));
        let mut hooks = CaptureHooks::new(points);
        let mut counter = ForwardCounter::default();
        m.prefill(&mut m.new_cache(), &[3, 1, 4, 1, 5, 9], &mut hooks, &mut counter)
            .unwrap();
        for l in 0..2 {
            let caps = hooks.get(HookPoint::new(l, HookSite::AttnOut)).unwrap();
            assert_eq!(caps.len(), 6);
            assert!(caps.iter().all(|c| c.len() == 16));
        }
    }

    #[test]
    fn decode_counts_and_overflows() {
        let m = Model::init(ModelConfig {
            max_seq_len: 4,
            ..ModelConfig::tiny(2)
        })
        .unwrap();
        let mut cache = m.new_cache();
        let mut counter = ForwardCounter::default();
        m.prefill(&mut cache, &[1, 2], &mut NoHooks, &mut counter).unwrap();
        for t in 0..2 {
            let logits = m.decode_step(&mut cache, t, &mut NoHooks, &mut counter).unwrap();
            assert_eq!(logits.len(), 32);
        }
        assert_eq!(counter.decode_calls, 2);
        assert!(matches!(
            m.decode_step(&mut cache, 0, &mut NoHooks, &mut counter),
            Err(RudderError::CacheOverflow { .. })
        ));
        assert_eq!(counter.decode_calls, 2);
    }

    #[test]
    fn out_of_vocab_token_is_rejected() {
        let m = tiny();
        assert!(matches!(
            m.forward_logits(&[99], &mut NoHooks),
            Err(RudderError::TokenOutOfRange { id: 99, .. })
        ));
    }

    #[test]
    fn zero_write_hook_is_bit_identical() {
        let m = tiny();
        let tokens = [5, 6, 7, 8];
        let base = m.forward_logits(&tokens, &mut NoHooks).unwrap();
        let mut zero = AddVectorHook {
            layer: 1,
            vector: vec![0.0; 16],
        };
        let hooked = m.forward_logits(&tokens, &mut zero).unwrap();
        let bits = |rows: &[Vec<f64>]| -> Vec<u64> { rows.iter().flatten().map(|x| x.to_bits()).collect() };
        assert_eq!(bits(&base), bits(&hooked));

        let mut capture = CaptureHooks::new([HookPoint::new(0, HookSite::AttnOut)]);
        let observed = m.forward_logits(&tokens, &mut capture).unwrap();
        assert_eq!(bits(&base), bits(&observed));
    }

    #[test]
    fn add_then_subtract_restores_baseline() {
        let m = tiny();
        let tokens = [2, 4, 6];
        let base = m.forward_logits(&tokens, &mut NoHooks).unwrap();
        let v: Vec<f64> = (0..16).map(|i| (i as f64 - 7.5) * 0.3).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();

        let mut plus = AddVectorHook {
            layer: 0,
            vector: v.clone(),
        };
        let shifted = m.forward_logits(&tokens, &mut plus).unwrap();
        assert!(shifted.iter().flatten().zip(base.iter().flatten()).any(|(a, b)| a != b));

        let mut minus = AddVectorHook { layer: 0, vector: neg };
        let mut both = Chain(&mut plus, &mut minus);
        let restored = m.forward_logits(&tokens, &mut both).unwrap();
        for (a, b) in restored.iter().flatten().zip(base.iter().flatten()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn untied_model_has_separate_unembedding() {
        let m = Model::init(ModelConfig {
            tied_embeddings: false,
            ..ModelConfig::tiny(4)
        })
        .unwrap();
        assert_ne!(m.embedding(3), m.unembedding(3));
        assert_eq!(m.named_params().last().unwrap().0, "unembed");
    }
}
