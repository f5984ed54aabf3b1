mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "morse-forge", version, about = "Finite checks for Morse boundaries of free products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArg {
    /// Run configuration (JSON, schema 1). Defaults to ℤ∗ℤ with the tree gauge.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> anyhow::Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CheckId {
    PrefixTransit,
    ProjectionQg,
    ConcatQg,
    NbhdNesting,
    RayMerge,
    VSystem,
    PhiPsi,
}

#[derive(Args, Clone, Debug, Default)]
pub struct CheckFlags {
    /// Ball radius (overrides budgets.ball_radius).
    #[arg(long)]
    pub radius: Option<u32>,
    /// Restrict the grid to one (λ, ε) point; needs --eps too.
    #[arg(long, requires = "eps")]
    pub lambda: Option<String>,
    #[arg(long, requires = "lambda")]
    pub eps: Option<String>,
    /// Slack over d(e, w) for prefix-transit paths.
    #[arg(long, default_value_t = 2)]
    pub extra: usize,
    /// Largest depth n (nbhd-nesting), K (ray-merge) or k (v-system).
    #[arg(long)]
    pub max_k: Option<u64>,
    /// Largest i for the v-system nesting axiom.
    #[arg(long, default_value_t = 3)]
    pub max_i: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Normal form and syllable length of a word.
    Normalize {
        word: String,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Run one exhaustive finite check and print its JSON report.
    Check {
        #[arg(value_enum)]
        id: CheckId,
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        flags: CheckFlags,
    },
    /// Build the matching p̂ and run the invariant suite.
    Match {
        #[command(flatten)]
        config: ConfigArg,
        /// Where to write the JSONL transcript (default: <output>/transcript.jsonl).
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Skip the induced-map and continuity checks.
        #[arg(long)]
        quick: bool,
    },
    /// Empirical gauge table of the canonical geodesic to a word, as CSV.
    Gauge {
        word: String,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        radius: Option<u32>,
    },
    /// Φ of a combinatorial ray and the Ψ round trip.
    Phi {
        comb: String,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 12)]
        depth: usize,
    },
    /// Cayley ball summary.
    Ball {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        radius: Option<u32>,
        /// Write the ball as a Graphviz file.
        #[arg(long)]
        emit_dot: Option<PathBuf>,
        /// Print vertices and adjacency too.
        #[arg(long)]
        full: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Normalize { word, config } => config.load().and_then(|c| commands::normalize(&c, &word)),
        Command::Check { id, config, flags } => config.load().and_then(|c| commands::check(&c, id, &flags)),
        Command::Match { config, transcript, quick } => config.load().and_then(|c| commands::run_match(&c, transcript, quick)),
        Command::Gauge { word, config, radius } => config.load().and_then(|c| commands::gauge(&c, &word, radius)),
        Command::Phi { comb, config, depth } => config.load().and_then(|c| commands::phi(&c, &comb, depth)),
        Command::Ball { config, radius, emit_dot, full } => config.load().and_then(|c| commands::ball(&c, radius, emit_dot, full)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::error_code(&e))
        }
    }
}
