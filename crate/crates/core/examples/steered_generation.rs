// SPDX-License-Identifier: MIT OR Apache-2.0

//! Caption one toy scene with and without steering and show the per-token
//! gate trace of the RUDDER run. The two-pass contrastive mode is only a
//! latency baseline; see `latency_bench`.
//!
//!     cargo run --example steered_generation

use rudder::cli::preset;
use rudder::steer::{generate, SteerMode};
use rudder::taskgen::{judge_caption, ToyScene};

fn main() -> rudder::Result<()> {
    let cfg = preset("toy-biased")?;
    let model = cfg.build_model()?;
    let opts = cfg.task.generate_options();

    // Find a scene the unsteered model gets wrong.
    let scene = (0..200)
        .map(|seed| ToyScene::generate(&cfg.task, seed))
        .find(|s| {
            let g = generate(
                &model,
                &s.prompt_ids,
                &cfg.steer.with_mode(SteerMode::Off),
                &cfg.strategy,
                &opts,
            );
            g.map(|g| !judge_caption(&g.tokens, s, &cfg.task).hallucinated.is_empty())
                .unwrap_or(false)
        })
        .expect("some scene hallucinates");
    println!("scene seed {} present {:?}", scene.seed, scene.present_objects);
    println!("prompt {:?}", scene.prompt_ids);

    for mode in [SteerMode::Off, SteerMode::RudderBeta, SteerMode::RudderAdd] {
        let steer = cfg.steer.with_mode(mode);
        let gen = generate(&model, &scene.prompt_ids, &steer, &cfg.strategy, &opts)?;
        let j = judge_caption(&gen.tokens, &scene, &cfg.task);
        println!(
            "{:<22} tokens {:?} hallucinated {:?} forwards (prefill {}, decode {})",
            mode.name(),
            gen.tokens,
            j.hallucinated,
            gen.trace.forward_counter.prefill_calls,
            gen.trace.forward_counter.decode_calls,
        );
        if mode == SteerMode::RudderBeta {
            for r in gen.trace.answer_records() {
                println!(
                    "    pos {:>2} token {:>2} s={:+.3} g={:.3} |v|={:.3}",
                    r.position,
                    r.token_id,
                    r.s.unwrap_or(f64::NAN),
                    r.g.unwrap_or(f64::NAN),
                    r.steer_norm
                );
            }
        }
    }
    Ok(())
}
