// SPDX-License-Identifier: MIT OR Apache-2.0

//! CHAIR_S / CHAIR_I and recall for vanilla and RUDDER decoding on the
//! biased toy task, swept over alpha_max.
//!
//!     cargo run --release --example hallucination_eval [n_scenes]

use rudder::cli::{preset, RECALL_FLOOR};
use rudder::steer::SteerMode;
use rudder::taskgen::{generate_scenes, run_scenes};

fn main() -> rudder::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let cfg = preset("toy-biased")?;
    let model = cfg.build_model()?;
    let scenes = generate_scenes(&cfg.task, n, cfg.seed);

    let off = cfg.steer.with_mode(SteerMode::Off);
    let (vanilla, _) = run_scenes(&model, &cfg.task, &scenes, &off, &cfg.strategy, cfg.seed)?;
    println!(
        "{:<14} chair_s {:.3} chair_i {:.3} recall {:.3}",
        "vanilla", vanilla.chair_s, vanilla.chair_i, vanilla.recall
    );

    for alpha in [1.0, 2.0, 4.0, 6.0, 10.0] {
        for mode in [SteerMode::RudderBeta, SteerMode::RudderAdd] {
            let mut steer = cfg.steer.with_mode(mode);
            steer.gate.alpha_max = alpha;
            let (report, _) = run_scenes(&model, &cfg.task, &scenes, &steer, &cfg.strategy, cfg.seed)?;
            let report = report.with_baseline(&vanilla);
            let ratio = report.recall_ratio.unwrap_or(0.0);
            println!(
                "{:<11} a={alpha:<4} chair_s {:.3} chair_i {:.3} recall {:.3} ({:.1}% of vanilla){}",
                mode.name(),
                report.chair_s,
                report.chair_i,
                report.recall,
                100.0 * ratio,
                if ratio < RECALL_FLOOR {
                    "  below recall floor"
                } else {
                    ""
                }
            );
        }
    }
    Ok(())
}
