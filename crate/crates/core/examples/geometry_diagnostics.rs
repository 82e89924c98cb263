// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-layer attention update statistics and the rotation between the
//! text-only and scene-conditioned CARD.
//!
//!     cargo run --release --example geometry_diagnostics

use rudder::cli::preset;
use rudder::diag::{layer_dynamics, sample_evidence, summarize};
use rudder::steer::SteerMode;
use rudder::taskgen::generate_scenes;

fn main() -> rudder::Result<()> {
    let cfg = preset("llava-like")?;
    let model = cfg.build_model()?;
    let scenes = generate_scenes(&cfg.task, 20, cfg.seed);
    let prompts: Vec<_> = scenes.iter().map(|s| s.prompt_ids.clone()).collect();

    println!("layer  n_tokens  abs_strength  rel_strength  coherence");
    for r in layer_dynamics(&model, &prompts)? {
        let coh = r.coherence.map_or("-".to_string(), |c| format!("{c:.4}"));
        println!(
            "{:>5}  {:>8}  {:>12.4}  {:>12.4}  {:>9}",
            r.layer, r.n_tokens, r.abs_strength, r.rel_strength, coh
        );
    }

    let steer = cfg.steer.with_mode(SteerMode::RudderBeta);
    let opts = cfg.task.generate_options();
    let mut evidence = Vec::new();
    for s in &scenes {
        let (_, ev) = sample_evidence(
            &model,
            &s.prompt_ids,
            &s.scene_free_prompt(),
            &steer,
            &cfg.strategy,
            &opts,
        )?;
        evidence.push(ev);
    }
    println!("{}", summarize(&evidence));
    Ok(())
}
