// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-token latency of every steering mode at batch size 1.
//!
//!     cargo run --release --example latency_bench [repeats]

use rudder::bench::{format_result, run_bench};
use rudder::cli::{bench_thresholds_hold, preset};
use rudder::steer::{SteerConfig, SteerMode};
use rudder::taskgen::generate_scenes;

fn main() -> rudder::Result<()> {
    let mut cfg = preset("bench")?;
    if let Some(r) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        cfg.bench.repeats = r;
    }
    let model = cfg.build_model()?;
    let prompts: Vec<_> = generate_scenes(&cfg.task, cfg.bench.n_prompts, cfg.seed)
        .into_iter()
        .map(|s| s.prompt_ids)
        .collect();
    let steers: Vec<SteerConfig> = SteerMode::ALL.iter().map(|&m| cfg.steer.with_mode(m)).collect();
    println!(
        "{} layers, d_model {}, {} tokens/run, {} prompts, {} repeats",
        model.config().n_layers,
        model.config().d_model,
        cfg.bench.tokens_per_run,
        cfg.bench.n_prompts,
        cfg.bench.repeats
    );
    let results = run_bench(&model, &prompts, &steers, &cfg.strategy, &cfg.bench, cfg.seed)?;
    for r in &results {
        println!("{}", format_result(r));
    }
    println!("thresholds hold: {}", bench_thresholds_hold(&results));
    Ok(())
}
