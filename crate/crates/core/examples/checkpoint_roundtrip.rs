// SPDX-License-Identifier: MIT OR Apache-2.0

//! Save a model, load it back, and run it from a config that points at the
//! file.
//!
//!     cargo run --example checkpoint_roundtrip

use rudder::cli::{preset, ModelSource};
use rudder::model::checkpoint;
use rudder::steer::generate;

fn main() -> rudder::Result<()> {
    let mut cfg = preset("toy-biased")?;
    let model = cfg.build_model()?;
    let dir = std::env::temp_dir().join(format!("rudder-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("toy-biased.rdr");
    checkpoint::save(&model, &path)?;
    println!(
        "wrote {} ({} parameters, {} bytes)",
        path.display(),
        model.n_params(),
        std::fs::metadata(&path)?.len()
    );

    cfg.model = ModelSource::Checkpoint { path: path.clone() };
    let loaded = cfg.build_model()?;
    let prompt = &rudder::taskgen::ToyScene::generate(&cfg.task, 3).prompt_ids;
    let opts = cfg.task.generate_options();
    let a = generate(&model, prompt, &cfg.steer, &cfg.strategy, &opts)?;
    let b = generate(&loaded, prompt, &cfg.steer, &cfg.strategy, &opts)?;
    println!("original {:?}\nreloaded {:?}", a.tokens, b.tokens);
    assert_eq!(a.trace.records, b.trace.records);
    println!("traces identical");
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
