// SPDX-License-Identifier: MIT OR Apache-2.0

//! `rudder` command line. Exit codes: 0 success, 2 config error, 3 runtime
//! error, 4 threshold failure under `--assert`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rudder::cli::{self, CmdOutcome, RunConfig};
use rudder::RudderError;

#[derive(Parser)]
#[command(
    name = "rudder",
    version,
    about = "Steered decoding runs, evaluation, benchmarks and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate captions and per-token traces
    Generate(RunArgs),
    /// Paired vanilla/steered hallucination metrics
    Eval(RunArgs),
    /// Latency and throughput of every steering mode
    Bench(RunArgs),
    /// Per-layer dynamics and directional evidence
    Diag(RunArgs),
    /// Print a built-in config as JSON
    Preset { name: String },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with status 4 when the report misses its thresholds
    #[arg(long = "assert")]
    assert_thresholds: bool,
}

fn is_config_error(e: &RudderError) -> bool {
    matches!(e, RudderError::Config(_) | RudderError::InvalidConfig(_))
}

fn set_threads() -> Result<(), RudderError> {
    let Ok(v) = std::env::var("RUDDER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| RudderError::Config(format!("RUDDER_THREADS: expected a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| RudderError::Config(format!("RUDDER_THREADS: {e}")))
}

fn run(args: RunArgs, cmd: fn(&RunConfig, &std::path::Path) -> rudder::Result<CmdOutcome>) -> ExitCode {
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args.out.unwrap_or_else(|| cfg.output.dir.clone());
    match cmd(&cfg, &out) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if args.assert_thresholds && outcome.passed == Some(false) {
                eprintln!("thresholds not met");
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = set_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Generate(a) => run(a, cli::cmd_generate),
        Command::Eval(a) => run(a, cli::cmd_eval),
        Command::Bench(a) => run(a, cli::cmd_bench),
        Command::Diag(a) => run(a, cli::cmd_diag),
        Command::Preset { name } => match cli::preset(&name) {
            Ok(p) => {
                println!("{}", p.to_json_pretty());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
