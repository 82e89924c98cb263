// SPDX-License-Identifier: MIT OR Apache-2.0

//! Config-file driven commands behind the `rudder` binary.
//!
//! A run config is strict JSON. It may name a preset, in which case the file
//! is merged over the preset before parsing. The config hash is the SHA-256
//! of the resolved config (output location excluded) and is written at the
//! top of every artifact together with the seed and engine version. Wall
//! clock data goes only to `run.log` and the bench timing table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bench::{format_result, results_to_csv, run_bench, BenchConfig, BenchResult};
use crate::diag::{dynamics_to_csv, dynamics_to_svg, layer_dynamics, sample_evidence, summarize, SampleEvidence};
use crate::error::{Result, RudderError};
use crate::gate::GateConfig;
use crate::model::{checkpoint, Model, ModelConfig};
use crate::steer::{generate, DecodeStrategy, GenerateOptions, SteerConfig, SteerMode, TraceHeader};
use crate::taskgen::{
    build_biased_model, build_copy_model_with, generate_scenes, run_scenes, CopyModelGains, EvalReport, TaskConfig,
    NOISE,
};
use crate::ENGINE_VERSION;

/// Minimum steered/vanilla recall for an eval to pass.
pub const RECALL_FLOOR: f64 = 0.95;
/// Minimum relative CHAIR_S reduction asserted by `eval --assert`.
pub const MIN_CHAIR_S_REDUCTION: f64 = 0.20;
pub const BETA_MIN_RELATIVE_THROUGHPUT: f64 = 0.90;
pub const CONTRASTIVE_MAX_RELATIVE_THROUGHPUT: f64 = 0.60;

pub const PRESETS: [&str; 5] = ["llava-like", "idefics-like", "instructblip-like", "toy-biased", "bench"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    /// Seeded random initialization.
    Random {
        config: ModelConfig,
    },
    /// Hand-built copy model for the toy task.
    Copy {
        #[serde(default)]
        gains: CopyModelGains,
    },
    /// Copy model with the frequent-object prior of `task.prior_strength`.
    Biased {
        #[serde(default)]
        gains: CopyModelGains,
    },
    Checkpoint {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagConfig {
    pub n_prompts: usize,
    /// Also write an SVG of the per-layer table.
    pub plots: bool,
}

impl Default for DiagConfig {
    fn default() -> Self {
        Self {
            n_prompts: 20,
            plots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub seed: u64,
    pub model: ModelSource,
    #[serde(default)]
    pub steer: SteerConfig,
    #[serde(default)]
    pub strategy: DecodeStrategy,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub diag: DiagConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn random_model(n_layers: usize, seed: u64) -> ModelSource {
    let task = TaskConfig::default();
    ModelSource::Random {
        config: ModelConfig {
            n_layers,
            d_model: 64,
            n_heads: 4,
            d_ff: 256,
            vocab_size: task.vocab_size(),
            max_seq_len: 320,
            tied_embeddings: true,
            seed,
        },
    }
}

fn rudder_steer(layer: usize, alpha_max: f64, k: f64) -> SteerConfig {
    SteerConfig {
        mode: SteerMode::RudderBeta,
        layer,
        gate: GateConfig {
            k,
            c: 1.0,
            g_min: 0.0,
            g_max: 1.0,
            alpha_max,
            tau: None,
        },
        noise_token: NOISE,
        ..SteerConfig::default()
    }
}

/// Built-in configs. The first three carry the published per-model gate
/// settings onto a 16-layer random decoder, keeping the injection layer at
/// the same relative depth.
pub fn preset(name: &str) -> Result<RunConfig> {
    let base = |model, steer| RunConfig {
        preset: Some(name.to_string()),
        seed: 0,
        model,
        steer,
        strategy: DecodeStrategy::Greedy,
        task: TaskConfig::default(),
        bench: BenchConfig::default(),
        diag: DiagConfig::default(),
        output: OutputConfig::default(),
    };
    Ok(match name {
        "llava-like" => base(random_model(16, 0), rudder_steer(15, 20.0, 5.0)),
        "idefics-like" => base(random_model(16, 0), rudder_steer(14, 8.0, 5.0)),
        "instructblip-like" => base(random_model(16, 0), rudder_steer(1, 6.5, 8.0)),
        "toy-biased" => base(
            ModelSource::Biased {
                gains: CopyModelGains::default(),
            },
            rudder_steer(0, 6.0, 5.0),
        ),
        "bench" => RunConfig {
            // The gate costs about 0.1% of a decode step here; resolving it
            // against timing jitter takes this many repeats.
            bench: BenchConfig {
                repeats: 25,
                n_prompts: 4,
                ..BenchConfig::default()
            },
            ..base(random_model(4, 0), rudder_steer(3, 20.0, 5.0))
        },
        other => {
            return Err(RudderError::Config(format!(
                "preset: unknown preset `{other}`, expected one of {}",
                PRESETS.join(", ")
            )))
        }
    })
}

/// Recursive object merge. An overlay that changes an enum tag replaces the
/// whole object instead of merging into the old variant.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            let retagged = ["source", "kind"]
                .iter()
                .any(|tag| o.get(*tag).is_some_and(|t| b.get(*tag) != Some(t)));
            if retagged {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn config_err(msg: impl Into<String>) -> RudderError {
    RudderError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| config_err(format!("invalid JSON: {e}")))?;
        let mut value = match raw.get("preset").and_then(Value::as_str) {
            Some(name) => serde_json::to_value(preset(name)?)?,
            None => Value::Object(Default::default()),
        };
        merge(&mut value, raw);
        let cfg: RunConfig =
            serde_path_to_error::deserialize(value).map_err(|e| config_err(format!("{}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Model dimensions implied by the config, without building weights.
    fn model_config(&self) -> Result<Option<ModelConfig>> {
        Ok(match &self.model {
            ModelSource::Random { config } => Some(config.clone()),
            ModelSource::Checkpoint { .. } => None,
            ModelSource::Copy { .. } | ModelSource::Biased { .. } => Some(ModelConfig {
                n_layers: 2,
                d_model: self.task.d_model,
                n_heads: 2,
                d_ff: 4,
                vocab_size: self.task.vocab_size(),
                max_seq_len: self.task.max_seq_len(),
                tied_embeddings: true,
                seed: self.seed,
            }),
        })
    }

    /// Field-level checks; every failure is a config error.
    pub fn validate(&self) -> Result<()> {
        let wrap = |field: &str, r: Result<()>| r.map_err(|e| config_err(format!("{field}: {e}")));
        wrap("task", self.task.validate())?;
        wrap("strategy", self.strategy.validate())?;
        wrap("bench", self.bench.validate())?;
        if self.diag.n_prompts == 0 {
            return Err(config_err("diag.n_prompts: must be at least 1"));
        }
        if let Some(mc) = self.model_config()? {
            wrap("model", mc.validate())?;
            wrap("steer", self.steer.validate(&mc))?;
            if mc.vocab_size < self.task.vocab_size() {
                return Err(config_err(format!(
                    "model.config.vocab_size: {} is smaller than the task vocabulary {}",
                    mc.vocab_size,
                    self.task.vocab_size()
                )));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical (key-sorted) JSON of this config with
    /// the output location removed.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output");
        }
        let canonical = serde_json::to_string(&v).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            config_hash: self.config_hash(),
            seed: self.seed,
            engine_version: ENGINE_VERSION.to_string(),
        }
    }

    pub fn build_model(&self) -> Result<Model> {
        let model = match &self.model {
            ModelSource::Random { config } => Model::init(config.clone())?,
            ModelSource::Copy { gains } => build_copy_model_with(&self.task, self.seed, gains)?,
            ModelSource::Biased { gains } => {
                let copy = build_copy_model_with(&self.task, self.seed, gains)?;
                build_biased_model(&copy, &self.task, self.task.prior_strength)?
            }
            ModelSource::Checkpoint { path } => {
                let m = checkpoint::load(path)?;
                self.steer
                    .validate(m.config())
                    .map_err(|e| config_err(format!("steer: {e}")))?;
                m
            }
        };
        Ok(model)
    }
}

/// What a command wrote and whether its thresholds held.
#[derive(Debug, Clone)]
pub struct CmdOutcome {
    pub files: Vec<PathBuf>,
    /// `None` when the command has no thresholds.
    pub passed: Option<bool>,
    pub summary: String,
}

struct Run<'a> {
    out: &'a Path,
    header: TraceHeader,
    files: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, out: &'a Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        Ok(Self {
            out,
            header: cfg.header(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn provenance(&self) -> String {
        format!(
            "config_hash={} seed={} engine_version={}",
            self.header.config_hash, self.header.seed, self.header.engine_version
        )
    }

    fn header_value(&self) -> serde_json::Map<String, Value> {
        let Value::Object(m) = serde_json::to_value(&self.header).expect("header serializes") else {
            unreachable!("header is a struct")
        };
        m
    }

    /// Append to the sidecar log; the only place timestamps are written.
    fn log(&self, command: &str, started: Instant, extra: &str) -> Result<()> {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.out.join("run.log"))?;
        writeln!(
            f,
            "unix_time={now} command={command} {} elapsed_ms={} {extra}",
            self.provenance(),
            started.elapsed().as_millis()
        )?;
        Ok(())
    }

    fn finish(self, passed: Option<bool>, summary: String) -> CmdOutcome {
        CmdOutcome {
            files: self.files,
            passed,
            summary,
        }
    }
}

/// Generate a caption for each task scene. Writes `generations.jsonl`
/// (tokens and logits) and `traces.jsonl` (per-token gate records).
pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<CmdOutcome> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out)?;
    let model = cfg.build_model()?;
    let scenes = generate_scenes(&cfg.task, cfg.task.n_scenes, cfg.seed);
    let opts = GenerateOptions {
        record_logits: true,
        ..cfg.task.generate_options()
    };
    let gens = scenes
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let strategy = cfg
                .strategy
                .reseeded(crate::numerics::derive_seed(cfg.seed, "nucleus", i as u64));
            generate(&model, &s.prompt_ids, &cfg.steer, &strategy, &opts)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut body = serde_json::to_string(&run.header)? + "\n";
    let mut traces = String::new();
    for (i, (g, s)) in gens.iter().zip(&scenes).enumerate() {
        let line = json!({
            "index": i,
            "scene_seed": s.seed,
            "prompt_ids": s.prompt_ids,
            "tokens": g.tokens,
            "logits": g.trace.logits,
        });
        body.push_str(&serde_json::to_string(&line)?);
        body.push('\n');
        traces.push_str(&g.trace.to_jsonl(&run.header));
    }
    run.write("generations.jsonl", &body)?;
    run.write("traces.jsonl", &traces)?;
    run.log("generate", started, &format!("n={}", gens.len()))?;
    let summary = format!("generated {} captions in mode {}", gens.len(), cfg.steer.mode.name());
    Ok(run.finish(None, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub chair_s: f64,
    pub chair_i: f64,
    pub recall: f64,
    pub recall_ratio: Option<f64>,
    pub n_captions: usize,
    pub n_hallucinated_captions: usize,
    pub n_mentioned: usize,
    pub n_hallucinated: usize,
    pub recall_num: u64,
    pub recall_den: u64,
}

impl From<&EvalReport> for EvalSummary {
    fn from(r: &EvalReport) -> Self {
        Self {
            chair_s: r.chair_s,
            chair_i: r.chair_i,
            recall: r.recall,
            recall_ratio: r.recall_ratio,
            n_captions: r.n_captions,
            n_hallucinated_captions: r.n_hallucinated_captions,
            n_mentioned: r.n_mentioned,
            n_hallucinated: r.n_hallucinated,
            recall_num: r.recall_num,
            recall_den: r.recall_den,
        }
    }
}

/// Paired vanilla/steered evaluation over the same scenes. Writes
/// `eval.json`. Thresholds: recall ratio at least the floor, CHAIR_S down
/// by at least 20% relative, CHAIR_I down.
pub fn cmd_eval(cfg: &RunConfig, out: &Path) -> Result<CmdOutcome> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out)?;
    let model = cfg.build_model()?;
    let scenes = generate_scenes(&cfg.task, cfg.task.n_scenes, cfg.seed);
    let off = cfg.steer.with_mode(SteerMode::Off);
    let (vanilla, _) = run_scenes(&model, &cfg.task, &scenes, &off, &cfg.strategy, cfg.seed)?;
    let (steered, _) = run_scenes(&model, &cfg.task, &scenes, &cfg.steer, &cfg.strategy, cfg.seed)?;
    let steered = steered.with_baseline(&vanilla);

    let reduction = if vanilla.chair_s > 0.0 {
        Some(1.0 - steered.chair_s / vanilla.chair_s)
    } else {
        None
    };
    let recall_ok = steered.recall_ratio.is_some_and(|r| r >= RECALL_FLOOR);
    let passed =
        recall_ok && reduction.is_some_and(|r| r >= MIN_CHAIR_S_REDUCTION) && steered.chair_i < vanilla.chair_i;

    let mut doc = run.header_value();
    doc.insert("steer_mode".into(), json!(cfg.steer.mode));
    doc.insert("strategy".into(), json!(cfg.strategy.name()));
    doc.insert("n_scenes".into(), json!(scenes.len()));
    doc.insert("vanilla".into(), json!(EvalSummary::from(&vanilla)));
    doc.insert("steered".into(), json!(EvalSummary::from(&steered)));
    doc.insert("chair_s_relative_reduction".into(), json!(reduction));
    doc.insert("recall_floor".into(), json!(RECALL_FLOOR));
    doc.insert("recall_gate_passed".into(), json!(recall_ok));
    run.write(
        "eval.json",
        &(serde_json::to_string_pretty(&Value::Object(doc))? + "\n"),
    )?;
    run.log("eval", started, "")?;
    let summary = format!(
        "vanilla chair_s {:.3} chair_i {:.3} recall {:.3} | {} chair_s {:.3} chair_i {:.3} recall {:.3} ratio {:.3}",
        vanilla.chair_s,
        vanilla.chair_i,
        vanilla.recall,
        cfg.steer.mode.name(),
        steered.chair_s,
        steered.chair_i,
        steered.recall,
        steered.recall_ratio.unwrap_or(f64::NAN)
    );
    Ok(run.finish(Some(passed), summary))
}

/// Throughput thresholds over whichever modes are present.
pub fn bench_thresholds_hold(results: &[BenchResult]) -> bool {
    let rel = |m: SteerMode| {
        results
            .iter()
            .find(|r| r.mode == m)
            .map(|r| r.relative_throughput_vs_vanilla)
    };
    let beta = rel(SteerMode::RudderBeta);
    let add = rel(SteerMode::RudderAdd);
    let contrastive = rel(SteerMode::ContrastiveTwoPass);
    beta.is_none_or(|b| b >= BETA_MIN_RELATIVE_THROUGHPUT)
        && match (beta, add) {
            (Some(b), Some(a)) => a >= b,
            _ => true,
        }
        && contrastive.is_none_or(|c| c <= CONTRASTIVE_MAX_RELATIVE_THROUGHPUT)
}

/// Time all four modes. Writes `bench.csv` (timings, which vary between
/// runs) and `bench_outputs.jsonl` (token digests, which do not).
pub fn cmd_bench(cfg: &RunConfig, out: &Path) -> Result<CmdOutcome> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out)?;
    let model = cfg.build_model()?;
    let prompts: Vec<_> = generate_scenes(&cfg.task, cfg.bench.n_prompts, cfg.seed)
        .into_iter()
        .map(|s| s.prompt_ids)
        .collect();
    let steers: Vec<SteerConfig> = SteerMode::ALL.iter().map(|&m| cfg.steer.with_mode(m)).collect();
    let results = run_bench(&model, &prompts, &steers, &cfg.strategy, &cfg.bench, cfg.seed)?;

    let mut digests = serde_json::to_string(&run.header)? + "\n";
    for r in &results {
        let line = json!({"mode": r.mode, "n_tokens": r.n_tokens, "output_sha256": r.output_digest});
        digests.push_str(&serde_json::to_string(&line)?);
        digests.push('\n');
    }
    run.write("bench.csv", &results_to_csv(&results, &run.header)?)?;
    run.write("bench_outputs.jsonl", &digests)?;
    let lines: Vec<String> = results.iter().map(format_result).collect();
    run.log("bench", started, &format!("results=[{}]", lines.join("; ")))?;
    Ok(run.finish(Some(bench_thresholds_hold(&results)), lines.join("\n")))
}

/// Per-layer dynamics and per-sample directional evidence. Writes
/// `layer_dynamics.csv`, `evidence.json` and, with `diag.plots`,
/// `layer_dynamics.svg`.
pub fn cmd_diag(cfg: &RunConfig, out: &Path) -> Result<CmdOutcome> {
    let started = Instant::now();
    let mut run = Run::new(cfg, out)?;
    let model = cfg.build_model()?;
    let scenes = generate_scenes(&cfg.task, cfg.diag.n_prompts, cfg.seed);
    let contexts: Vec<_> = scenes
        .iter()
        .map(|s| s.prompt_ids[..s.prompt_ids.len() - 1].to_vec())
        .collect();
    let dynamics = layer_dynamics(&model, &contexts)?;

    let text_prompt = cfg.task.text_only_prompt();
    let opts = cfg.task.generate_options();
    let samples = scenes
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let strategy = cfg
                .strategy
                .reseeded(crate::numerics::derive_seed(cfg.seed, "nucleus", i as u64));
            let (gen, evidence) = sample_evidence(&model, &s.prompt_ids, &text_prompt, &cfg.steer, &strategy, &opts)?;
            Ok(SampleEvidence {
                index: i,
                tokens: gen.tokens,
                evidence,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&samples.iter().map(|s| s.evidence.clone()).collect::<Vec<_>>());

    run.write("layer_dynamics.csv", &dynamics_to_csv(&dynamics, &run.provenance())?)?;
    let mut doc = run.header_value();
    doc.insert("layer".into(), json!(cfg.steer.layer));
    doc.insert("steer_mode".into(), json!(cfg.steer.mode));
    doc.insert("summary".into(), json!(summary));
    doc.insert("samples".into(), json!(samples));
    run.write(
        "evidence.json",
        &(serde_json::to_string_pretty(&Value::Object(doc))? + "\n"),
    )?;
    if cfg.diag.plots {
        let svg = format!("<!-- {} -->\n{}", run.provenance(), dynamics_to_svg(&dynamics));
        run.write("layer_dynamics.svg", &svg)?;
    }
    run.log("diag", started, "")?;
    Ok(run.finish(None, summary.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_roundtrip() {
        for name in PRESETS {
            let p = preset(name).unwrap();
            p.validate().unwrap();
            let back = RunConfig::from_json_str(&p.to_json_pretty()).unwrap();
            assert_eq!(back, p);
        }
        assert!(matches!(preset("nope"), Err(RudderError::Config(_))));
    }

    #[test]
    fn unknown_field_is_named() {
        let err = RunConfig::from_json_str(r#"{"preset":"toy-biased","steer":{"gate":{"kk":1}}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, RudderError::Config(_)));
        assert!(msg.contains("steer.gate") && msg.contains("kk"), "{msg}");
        let top = RunConfig::from_json_str(r#"{"preset":"bench","sed":1}"#)
            .unwrap_err()
            .to_string();
        assert!(top.contains("sed"), "{top}");
    }

    #[test]
    fn overrides_merge_over_preset() {
        let c =
            RunConfig::from_json_str(r#"{"preset":"toy-biased","seed":5,"steer":{"gate":{"alpha_max":0}}}"#).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.steer.gate.alpha_max, 0.0);
        assert_eq!(c.steer.gate.k, 5.0);
        let r = RunConfig::from_json_str(r#"{"preset":"toy-biased","model":{"source":"copy"}}"#).unwrap();
        assert!(matches!(r.model, ModelSource::Copy { .. }));
    }

    #[test]
    fn validation_errors_are_config_errors() {
        let e = RunConfig::from_json_str(r#"{"preset":"toy-biased","steer":{"layer":7}}"#).unwrap_err();
        assert!(matches!(e, RudderError::Config(_)), "{e}");
        assert!(e.to_string().starts_with("config error: steer"));
        let e = RunConfig::from_json_str(r#"{"preset":"bench","bench":{"tokens_per_run":10}}"#).unwrap_err();
        assert!(e.to_string().contains("bench"));
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = preset("toy-biased").unwrap();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 1;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }
}
