// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hand-built two-layer model that copies the scene's objects.
//!
//! Every token and position is a sum of orthonormal, mean-zero feature
//! directions, so LayerNorm reduces to a rescaling and each logit reads one
//! coefficient of the residual. Layer 0 has two heads:
//!
//! * copy head: attends to object tokens in scene slots and writes the mean
//!   of their embeddings, so the attention output points at the present
//!   objects;
//! * repeat head: attends to already generated positions (with a BOS sink
//!   when there are none) and subtracts their object embeddings.
//!
//! Layer 1 is zero and the first MLP only writes a constant offset. `STOP`
//! wins once every present object has been emitted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{TaskConfig, BOS, FILLER, FIRST_OBJECT, NOISE, QUERY_A, QUERY_B, STOP};
use crate::error::{Result, RudderError};
use crate::model::{Model, ModelConfig, TokenId};
use crate::numerics::{derive_seed, dot, norm};

/// Control features in addition to one direction per object.
const N_CONTROL: usize = 11;

/// Tunable strengths of the hand-built circuit, in units of residual
/// coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CopyModelGains {
    /// Total object coefficient written by the copy head, shared over the
    /// present objects.
    pub copy: f64,
    /// Total coefficient removed from already emitted objects.
    pub repeat_penalty: f64,
    pub query_gain: f64,
    pub key_gain: f64,
    pub repeat_key_gain: f64,
    pub sink_gain: f64,
    /// Logit coefficient of `STOP` relative to the position bias feature.
    pub stop_bias: f64,
    /// Embedding scale of the non-object tokens.
    pub control_scale: f64,
    /// Attention output bias along a dedicated feature.
    pub attn_bias: f64,
    /// Constant written by the first MLP along its own feature. It sits
    /// after the steering site and only rescales the final LayerNorm, so
    /// greedy choices are unchanged while the logit scale depends less on
    /// the residual norm.
    pub final_offset: f64,
}

impl Default for CopyModelGains {
    fn default() -> Self {
        Self {
            copy: 6.0,
            repeat_penalty: 40.0,
            query_gain: 3.5,
            key_gain: 3.5,
            repeat_key_gain: 4.0,
            sink_gain: 2.0,
            stop_bias: 0.4,
            control_scale: 0.5,
            attn_bias: 0.2,
            final_offset: 4.0,
        }
    }
}

struct Features {
    objects: Vec<Vec<f64>>,
    bias: Vec<f64>,
    scene: Vec<f64>,
    generated: Vec<f64>,
    bos: Vec<f64>,
    filler: Vec<f64>,
    query_a: Vec<f64>,
    query_b: Vec<f64>,
    stop: Vec<f64>,
    noise: Vec<f64>,
    attn: Vec<f64>,
    offset: Vec<f64>,
}

/// `count` orthonormal vectors orthogonal to the all-ones vector: seeded
/// Gaussian draws followed by one Gram-Schmidt pass.
fn mean_free_basis(d: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ones = vec![1.0 / (d as f64).sqrt(); d];
    let mut basis: Vec<Vec<f64>> = vec![ones];
    while basis.len() < count + 1 {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = norm(&v);
        if n < 1e-6 {
            return Err(RudderError::InvalidConfig("degenerate basis draw".into()));
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    basis.remove(0);
    Ok(basis)
}

fn features(task: &TaskConfig, seed: u64) -> Result<Features> {
    let d = task.d_model;
    let n = task.n_objects;
    let mut basis = mean_free_basis(d, n + N_CONTROL, derive_seed(seed, "copy-basis", 0))?;
    let mut control = basis.split_off(n).into_iter();
    let mut next = || control.next().expect("basis has all control features");
    Ok(Features {
        objects: basis,
        bias: next(),
        scene: next(),
        generated: next(),
        bos: next(),
        filler: next(),
        query_a: next(),
        query_b: next(),
        stop: next(),
        noise: next(),
        attn: next(),
        offset: next(),
    })
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    dst.iter_mut().zip(x).for_each(|(d, v)| *d += a * v);
}

pub fn build_copy_model(task: &TaskConfig, seed: u64) -> Result<Model> {
    build_copy_model_with(task, seed, &CopyModelGains::default())
}

pub fn build_copy_model_with(task: &TaskConfig, seed: u64, gains: &CopyModelGains) -> Result<Model> {
    task.validate()?;
    let d = task.d_model;
    let n = task.n_objects;
    if n + N_CONTROL + 1 > d {
        return Err(RudderError::CapacityExceeded {
            what: "orthogonal feature directions",
            needed: n + N_CONTROL + 1,
            available: d,
        });
    }
    let config = ModelConfig {
        n_layers: 2,
        d_model: d,
        n_heads: 2,
        d_ff: 4,
        vocab_size: task.vocab_size(),
        max_seq_len: task.max_seq_len(),
        tied_embeddings: true,
        seed,
    };
    config.validate()?;
    let hd = config.head_dim();
    if n > hd {
        return Err(RudderError::CapacityExceeded {
            what: "copy head value dimensions",
            needed: n,
            available: hd,
        });
    }

    let f = features(task, seed)?;
    let mut model = Model::zeroed(config)?;

    let cs = gains.control_scale;
    let set_tok = |model: &mut Model, t: TokenId, v: &[f64]| {
        let t = t as usize;
        model.tok_emb[t * d..(t + 1) * d].copy_from_slice(v);
    };
    let scaled = |v: &[f64], a: f64| -> Vec<f64> { v.iter().map(|x| a * x).collect() };
    for (i, e) in f.objects.iter().enumerate() {
        set_tok(&mut model, FIRST_OBJECT + i as TokenId, e);
    }
    set_tok(&mut model, BOS, &scaled(&f.bos, cs));
    set_tok(&mut model, FILLER, &scaled(&f.filler, cs));
    set_tok(&mut model, QUERY_A, &scaled(&f.query_a, cs));
    set_tok(&mut model, QUERY_B, &scaled(&f.query_b, cs));
    set_tok(&mut model, NOISE, &scaled(&f.noise, cs));
    let mut stop = f.stop.clone();
    axpy(&mut stop, gains.stop_bias, &f.bias);
    set_tok(&mut model, STOP, &stop);

    let prompt_len = task.prompt_len();
    for pos in 0..task.max_seq_len() {
        let row = &mut model.pos_emb[pos * d..(pos + 1) * d];
        axpy(row, 1.0, &f.bias);
        if (1..=task.n_slots).contains(&pos) {
            axpy(row, 1.0, &f.scene);
        }
        if pos >= prompt_len {
            axpy(row, 1.0, &f.generated);
        }
    }

    // LayerNorm maps a residual of norm sqrt(3) (object + bias + slot
    // feature) to norm sqrt(d); value weights undo that scale.
    let ln_scale = (3.0 / d as f64).sqrt();
    let block = &mut model.blocks[0];

    block.q.weight[..d].copy_from_slice(&scaled(&f.bias, gains.query_gain));
    block.q.weight[hd * d..(hd + 1) * d].copy_from_slice(&scaled(&f.bias, gains.query_gain));

    let copy_key = &mut block.k.weight[..d];
    for e in &f.objects {
        axpy(copy_key, gains.key_gain, e);
    }
    axpy(copy_key, gains.key_gain, &f.scene);
    let repeat_key = &mut block.k.weight[hd * d..(hd + 1) * d];
    axpy(repeat_key, gains.repeat_key_gain, &f.generated);
    axpy(repeat_key, gains.sink_gain, &f.bos);

    let a_copy = gains.copy * ln_scale;
    let a_repeat = -gains.repeat_penalty * ln_scale;
    for (i, e) in f.objects.iter().enumerate() {
        block.v.weight[i * d..(i + 1) * d].copy_from_slice(&scaled(e, a_copy));
        block.v.weight[(hd + i) * d..(hd + i + 1) * d].copy_from_slice(&scaled(e, a_repeat));
        for o in 0..d {
            block.o.weight[o * d + i] = e[o];
            block.o.weight[o * d + hd + i] = e[o];
        }
    }
    block.o.bias.copy_from_slice(&scaled(&f.attn, gains.attn_bias));
    block.fc2.bias.copy_from_slice(&scaled(&f.offset, gains.final_offset));

    Ok(model)
}

/// Copy model with an untied unembedding in which the first `n_frequent`
/// objects also read the query feature, so they are favoured on the first
/// answer step regardless of the scene.
pub fn build_biased_model(copy: &Model, task: &TaskConfig, prior_strength: f64) -> Result<Model> {
    if !(prior_strength >= 0.0 && prior_strength.is_finite()) {
        return Err(RudderError::InvalidConfig("prior_strength must be non-negative".into()));
    }
    if prior_strength == 0.0 {
        return Ok(copy.clone());
    }
    let d = copy.config.d_model;
    let qb = copy.embedding(QUERY_B);
    let qb_norm = norm(qb);
    let qb_dir: Vec<f64> = qb.iter().map(|x| x / qb_norm).collect();
    let mut unembed = copy.tok_emb.clone();
    for t in task.frequent_objects() {
        let t = t as usize;
        axpy(&mut unembed[t * d..(t + 1) * d], prior_strength, &qb_dir);
    }
    let mut model = copy.clone();
    model.config.tied_embeddings = false;
    model.unembed = Some(unembed);
    Ok(model)
}
