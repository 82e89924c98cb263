// SPDX-License-Identifier: MIT OR Apache-2.0

//! Wall-clock latency of the steering modes at batch size 1.
//!
//! Every mode decodes the same prompts for a fixed number of tokens with no
//! stop token. Modes are interleaved prompt by prompt, in an order that
//! rotates, so slow drift in the machine affects them alike. Each repeat
//! yields the median decode-step latency per mode; the reported figure is
//! the median over repeats.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RudderError};
use crate::model::{Model, TokenId};
use crate::numerics::derive_seed;
use crate::steer::{generate, DecodeStrategy, GenerateOptions, SteerConfig, SteerMode, TraceHeader};

/// Timing below this many tokens per run is dominated by noise.
pub const MIN_TOKENS_PER_RUN: usize = 64;
pub const MIN_REPEATS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub tokens_per_run: usize,
    pub repeats: usize,
    /// Untimed full generations per mode before measuring.
    pub warmup: usize,
    /// Number of task prompts decoded per mode and repeat.
    pub n_prompts: usize,
    /// Must stay false; measurements are never run concurrently.
    pub parallel_measurements: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            tokens_per_run: 256,
            repeats: 5,
            warmup: 2,
            n_prompts: 2,
            parallel_measurements: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.parallel_measurements {
            return Err(RudderError::InvalidConfig(
                "bench.parallel_measurements: timing runs are serialized; parallel measurement is not supported".into(),
            ));
        }
        if self.tokens_per_run < MIN_TOKENS_PER_RUN {
            return Err(RudderError::InsufficientTokens {
                min: MIN_TOKENS_PER_RUN,
                got: self.tokens_per_run,
            });
        }
        if self.repeats < MIN_REPEATS {
            return Err(RudderError::InsufficientRepeats {
                min: MIN_REPEATS,
                got: self.repeats,
            });
        }
        if self.n_prompts == 0 {
            return Err(RudderError::InvalidConfig("bench.n_prompts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub mode: SteerMode,
    pub ms_per_token: f64,
    pub tokens_per_second: f64,
    /// Tokens generated per repeat, summed over prompts.
    pub n_tokens: usize,
    pub n_warmup: usize,
    pub repeats: usize,
    /// Total timed nanoseconds over all repeats, whole generations
    /// including prefill.
    pub wall_clock_total: u128,
    pub relative_throughput_vs_vanilla: f64,
    /// Per-repeat ms/token, in measurement order. Each is the median
    /// decode-step latency of that repeat, which keeps interrupts and
    /// scheduler stalls out of the figure.
    pub samples_ms_per_token: Vec<f64>,
    /// Hex SHA-256 over the generated token ids of every prompt, which all
    /// timed runs reproduced.
    pub output_digest: String,
}

fn digest(outputs: &[Vec<TokenId>]) -> String {
    let mut h = Sha256::new();
    for tokens in outputs {
        h.update((tokens.len() as u64).to_le_bytes());
        for t in tokens {
            h.update(t.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Time every mode in `steers` (an `Off` entry is added first when absent).
///
/// Before timing, each mode is run once untimed per prompt; every timed run
/// must reproduce that reference token sequence exactly.
pub fn run_bench(
    model: &Model,
    prompts: &[Vec<TokenId>],
    steers: &[SteerConfig],
    strategy: &DecodeStrategy,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<Vec<BenchResult>> {
    cfg.validate()?;
    strategy.validate()?;
    let prompts = &prompts[..cfg.n_prompts.min(prompts.len())];
    if prompts.is_empty() {
        return Err(RudderError::EmptySequence);
    }
    let mut steers = steers.to_vec();
    if !steers.iter().any(|s| s.mode == SteerMode::Off) {
        let base = steers.first().cloned().unwrap_or_default();
        steers.insert(0, base.with_mode(SteerMode::Off));
    }
    for s in &steers {
        s.validate(model.config())?;
    }

    let opts = GenerateOptions::new(cfg.tokens_per_run);
    let strategies: Vec<DecodeStrategy> = (0..prompts.len())
        .map(|i| strategy.reseeded(derive_seed(seed, "nucleus", i as u64)))
        .collect();
    let run_once = |steer: &SteerConfig, i: usize| generate(model, &prompts[i], steer, &strategies[i], &opts);

    let mut reference: Vec<Vec<Vec<TokenId>>> = Vec::with_capacity(steers.len());
    for steer in &steers {
        let mut per_prompt = Vec::with_capacity(prompts.len());
        for i in 0..prompts.len() {
            per_prompt.push(run_once(steer, i)?.tokens);
        }
        reference.push(per_prompt);
    }
    for steer in &steers {
        for _ in 0..cfg.warmup {
            for i in 0..prompts.len() {
                run_once(steer, i)?;
            }
        }
    }

    let n_tokens: Vec<usize> = reference.iter().map(|r| r.iter().map(Vec::len).sum()).collect();
    let mut samples = vec![Vec::with_capacity(cfg.repeats); steers.len()];
    let mut totals = vec![0u128; steers.len()];
    for r in 0..cfg.repeats {
        let mut steps: Vec<Vec<f64>> = n_tokens.iter().map(|&n| Vec::with_capacity(n)).collect();
        for i in 0..prompts.len() {
            // Rotate the mode order so no mode always follows the same one.
            for j in 0..steers.len() {
                let m = (r + i + j) % steers.len();
                let start = Instant::now();
                let out = run_once(&steers[m], i)?;
                totals[m] += start.elapsed().as_nanos();
                if out.tokens != reference[m][i] {
                    return Err(RudderError::BenchOutputMismatch {
                        mode: steers[m].mode.name().to_string(),
                    });
                }
                steps[m].extend(out.trace.timing_ns.iter().map(|&ns| ns as f64));
            }
        }
        for (m, s) in steps.iter().enumerate() {
            samples[m].push(median(s) / 1e6);
        }
    }

    let ms: Vec<f64> = samples.iter().map(|s| median(s)).collect();
    let off = steers
        .iter()
        .position(|s| s.mode == SteerMode::Off)
        .expect("off mode present");
    Ok(steers
        .iter()
        .enumerate()
        .map(|(m, steer)| BenchResult {
            mode: steer.mode,
            ms_per_token: ms[m],
            tokens_per_second: 1000.0 / ms[m],
            n_tokens: n_tokens[m],
            n_warmup: cfg.warmup,
            repeats: cfg.repeats,
            wall_clock_total: totals[m],
            relative_throughput_vs_vanilla: ms[off] / ms[m],
            samples_ms_per_token: samples[m].clone(),
            output_digest: digest(&reference[m]),
        })
        .collect())
}

#[derive(Serialize)]
struct CsvRow<'a> {
    mode: &'a str,
    ms_per_token: f64,
    tokens_per_second: f64,
    relative_throughput: f64,
    repeats: usize,
    seed: u64,
    config_hash: &'a str,
}

/// CSV with a leading `#` provenance line.
pub fn results_to_csv(results: &[BenchResult], header: &TraceHeader) -> Result<String> {
    let mut out = format!(
        "# config_hash={} seed={} engine_version={}\n",
        header.config_hash, header.seed, header.engine_version
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in results {
        w.serialize(CsvRow {
            mode: r.mode.name(),
            ms_per_token: r.ms_per_token,
            tokens_per_second: r.tokens_per_second,
            relative_throughput: r.relative_throughput_vs_vanilla,
            repeats: r.repeats,
            seed: header.seed,
            config_hash: &header.config_hash,
        })
        .map_err(|e| RudderError::Io(std::io::Error::other(e)))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| RudderError::Io(std::io::Error::other(e.to_string())))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

/// Human-readable line in the style "17.6 ms/token, 56.7 token/s".
pub fn format_result(r: &BenchResult) -> String {
    format!(
        "{:<22} {:.3} ms/token, {:.1} token/s, {:.1}% of vanilla",
        r.mode.name(),
        r.ms_per_token,
        r.tokens_per_second,
        100.0 * r.relative_throughput_vs_vanilla
    )
}
