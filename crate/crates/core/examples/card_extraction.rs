// SPDX-License-Identifier: MIT OR Apache-2.0

//! Extract a CARD from one prefill and compare the pooling modes.
//!
//!     cargo run --example card_extraction

use rudder::card::extract_card_from_prefill;
use rudder::model::{Model, ModelConfig};
use rudder::numerics::{cosine_similarity, PoolMode};

fn main() -> rudder::Result<()> {
    let model = Model::init(ModelConfig {
        n_layers: 4,
        d_model: 32,
        n_heads: 4,
        d_ff: 64,
        vocab_size: 40,
        max_seq_len: 128,
        tied_embeddings: true,
        seed: 7,
    })?;
    let prompt: Vec<u32> = vec![0, 12, 5, 31, 7, 7, 19, 2, 3];

    for layer in 0..model.config().n_layers {
        let (mean, counter) = extract_card_from_prefill(&model, &prompt, layer, PoolMode::Mean)?;
        let (weighted, _) = extract_card_from_prefill(&model, &prompt, layer, PoolMode::NormWeightedMean)?;
        println!(
            "layer {layer}: |card|={:.6} cos(mean, norm-weighted)={:.4} forwards={:?}",
            mean.direction.norm(),
            cosine_similarity(mean.direction.as_slice(), weighted.direction.as_slice())?,
            counter,
        );
    }

    // Different context, different direction.
    let other: Vec<u32> = vec![0, 33, 34, 35, 36, 2, 3];
    let (a, _) = extract_card_from_prefill(&model, &prompt, 3, PoolMode::Mean)?;
    let (b, _) = extract_card_from_prefill(&model, &other, 3, PoolMode::Mean)?;
    println!(
        "cosine between the CARDs of two prompts at layer 3: {:.4}",
        cosine_similarity(a.direction.as_slice(), b.direction.as_slice())?
    );
    Ok(())
}
