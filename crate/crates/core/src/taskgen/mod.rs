// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic object-listing task.
//!
//! A scene is a fixed number of slots, some holding object tokens and the
//! rest filler. The prompt is `[BOS, slot.., QUERY_A, QUERY_B]` and the
//! expected answer lists the present objects followed by `STOP`. Object
//! tokens are their own mentions, so captions are judged with set
//! arithmetic.

mod copy_model;
mod metrics;

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use copy_model::{build_biased_model, build_copy_model, build_copy_model_with, CopyModelGains};
pub use metrics::{evaluate, judge_caption, CaptionJudgment, EvalReport};

use crate::error::{Result, RudderError};
use crate::model::{Model, TokenId};
use crate::numerics::derive_seed;
use crate::steer::{generate, DecodeStrategy, GenerateOptions, Generation, SteerConfig};

pub const BOS: TokenId = 0;
pub const FILLER: TokenId = 1;
pub const QUERY_A: TokenId = 2;
pub const QUERY_B: TokenId = 3;
pub const STOP: TokenId = 4;
pub const NOISE: TokenId = 5;
/// First object token id; objects occupy `FIRST_OBJECT..FIRST_OBJECT + n_objects`.
pub const FIRST_OBJECT: TokenId = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub n_scenes: usize,
    pub n_objects: usize,
    /// Scene slots; each scene holds between 1 and `objects_per_scene` objects.
    pub n_slots: usize,
    pub objects_per_scene: usize,
    /// The first `n_frequent` objects receive the language-prior bias.
    pub n_frequent: usize,
    pub prior_strength: f64,
    pub d_model: usize,
    pub max_new_tokens: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            n_scenes: 200,
            n_objects: 12,
            n_slots: 6,
            objects_per_scene: 6,
            n_frequent: 2,
            prior_strength: 4.4,
            d_model: 24,
            max_new_tokens: 9,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RudderError::InvalidConfig(m));
        if self.n_scenes == 0 {
            return bad("task.n_scenes must be at least 1".into());
        }
        if self.n_slots == 0 || self.objects_per_scene == 0 {
            return bad("task.n_slots and task.objects_per_scene must be at least 1".into());
        }
        if self.objects_per_scene > self.n_slots {
            return bad(format!(
                "task.objects_per_scene ({}) exceeds task.n_slots ({})",
                self.objects_per_scene, self.n_slots
            ));
        }
        if self.objects_per_scene > self.n_objects {
            return bad(format!(
                "task.objects_per_scene ({}) exceeds task.n_objects ({})",
                self.objects_per_scene, self.n_objects
            ));
        }
        if self.n_frequent > self.n_objects {
            return bad("task.n_frequent exceeds task.n_objects".into());
        }
        if !(self.prior_strength >= 0.0 && self.prior_strength.is_finite()) {
            return bad("task.prior_strength must be non-negative".into());
        }
        if self.max_new_tokens == 0 {
            return bad("task.max_new_tokens must be at least 1".into());
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        FIRST_OBJECT as usize + self.n_objects
    }

    pub fn prompt_len(&self) -> usize {
        self.n_slots + 3
    }

    /// Sequence capacity needed for a prompt plus a full answer.
    pub fn max_seq_len(&self) -> usize {
        self.prompt_len() + self.max_new_tokens
    }

    pub fn is_object(&self, t: TokenId) -> bool {
        t >= FIRST_OBJECT && ((t - FIRST_OBJECT) as usize) < self.n_objects
    }

    pub fn objects(&self) -> impl Iterator<Item = TokenId> {
        FIRST_OBJECT..FIRST_OBJECT + self.n_objects as TokenId
    }

    pub fn frequent_objects(&self) -> impl Iterator<Item = TokenId> {
        FIRST_OBJECT..FIRST_OBJECT + self.n_frequent as TokenId
    }

    /// Prompt with the scene prefix removed.
    pub fn text_only_prompt(&self) -> Vec<TokenId> {
        vec![BOS, QUERY_A, QUERY_B]
    }

    pub fn generate_options(&self) -> GenerateOptions {
        GenerateOptions {
            max_new_tokens: self.max_new_tokens,
            stop_token: Some(STOP),
            record_logits: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyScene {
    pub seed: u64,
    pub present_objects: BTreeSet<TokenId>,
    pub prompt_ids: Vec<TokenId>,
}

impl ToyScene {
    pub fn generate(cfg: &TaskConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(1..=cfg.objects_per_scene);
        let objects: Vec<TokenId> = sample(&mut rng, cfg.n_objects, m)
            .into_iter()
            .map(|i| FIRST_OBJECT + i as TokenId)
            .collect();
        let slots = sample(&mut rng, cfg.n_slots, m);
        let mut scene = vec![FILLER; cfg.n_slots];
        for (slot, &obj) in slots.into_iter().zip(&objects) {
            scene[slot] = obj;
        }
        let mut prompt_ids = Vec::with_capacity(cfg.prompt_len());
        prompt_ids.push(BOS);
        prompt_ids.extend(scene);
        prompt_ids.extend([QUERY_A, QUERY_B]);
        Self {
            seed,
            present_objects: objects.into_iter().collect(),
            prompt_ids,
        }
    }

    /// The prompt minus the scene prefix.
    pub fn scene_free_prompt(&self) -> Vec<TokenId> {
        let mut p = vec![self.prompt_ids[0]];
        p.extend_from_slice(&self.prompt_ids[self.prompt_ids.len() - 2..]);
        p
    }
}

/// `n` scenes with seeds derived from `seed`.
pub fn generate_scenes(cfg: &TaskConfig, n: usize, seed: u64) -> Vec<ToyScene> {
    (0..n as u64)
        .map(|i| ToyScene::generate(cfg, derive_seed(seed, "scene", i)))
        .collect()
}

/// Scenes as JSON lines.
pub fn scenes_to_jsonl(scenes: &[ToyScene]) -> String {
    scenes
        .iter()
        .map(|s| serde_json::to_string(s).expect("scenes serialize") + "\n")
        .collect()
}

/// Generate one caption per scene and judge it. Nucleus seeds are derived
/// per scene from `seed`. Scenes fan out across the rayon pool; results are
/// collected in scene order.
pub fn run_scenes(
    model: &Model,
    task: &TaskConfig,
    scenes: &[ToyScene],
    steer: &SteerConfig,
    strategy: &DecodeStrategy,
    seed: u64,
) -> Result<(EvalReport, Vec<Generation>)> {
    let opts = task.generate_options();
    let gens: Vec<Generation> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let strategy = strategy.reseeded(derive_seed(seed, "nucleus", i as u64));
            generate(model, &scene.prompt_ids, steer, &strategy, &opts)
        })
        .collect::<Result<_>>()?;
    let judgments: Vec<CaptionJudgment> = gens
        .iter()
        .zip(scenes)
        .map(|(g, s)| judge_caption(&g.tokens, s, task))
        .collect();
    Ok((evaluate(&judgments), gens))
}
