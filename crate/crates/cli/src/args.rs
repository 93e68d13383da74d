use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use glass_entropy::estimate::BURN_IN;

#[derive(Debug, Parser)]
#[command(name = "glass-entropy", version, about = "Entropy bounds for Glass network attractors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the focal-point and wall conditions.
    Validate,
    /// Box transition graph and its entropy.
    Tg,
    /// First-return cycles through the starting edge.
    Cycles,
    /// Returning cones and cycle maps.
    Cones,
    /// Trapping-region verification.
    Trap,
    /// Refined graphs TG_r(0..=k) and their entropies.
    Refine,
    /// Wall-to-wall symbol sequence from a point in a returning cone.
    Simulate,
    /// Distinct block counts of a symbol sequence.
    Blocks,
    /// Entropy estimate from the growth of block counts.
    Fit,
    /// Full pipeline from validation to refinement.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Tg => "tg",
            Command::Cycles => "cycles",
            Command::Cones => "cones",
            Command::Trap => "trap",
            Command::Refine => "refine",
            Command::Simulate => "simulate",
            Command::Blocks => "blocks",
            Command::Fit => "fit",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
    /// Newline-delimited bitstrings (symbol sequences only).
    Bits,
    /// Little-endian u16 box indices (symbol sequences only).
    U16,
}

#[derive(Debug, Args)]
pub struct Options {
    /// Network description (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    /// Starting edge as FROM>TO bitstrings.
    #[arg(long, global = true, value_name = "FROM>TO")]
    pub edge: Option<String>,
    /// Longest first-return cycle to enumerate.
    #[arg(long, global = true, value_name = "M", default_value_t = 12)]
    pub max_cycle_len: usize,
    /// Trap file with the starting edge and labelled cycles.
    #[arg(long, global = true, value_name = "PATH")]
    pub trap: Option<PathBuf>,
    /// Labelled cycle, e.g. A=1110,0110,0100,... (repeatable).
    #[arg(long, global = true, value_name = "LABEL=BOXES")]
    pub cycle: Vec<String>,
    /// Refinement level.
    #[arg(long, global = true, value_name = "K", default_value_t = 2)]
    pub k: usize,
    /// Cycle word to forbid at level k, e.g. BAAB (repeatable).
    #[arg(long, global = true, value_name = "WORD")]
    pub forbid: Vec<String>,
    /// Wall transitions to record.
    #[arg(long, global = true, value_name = "N", default_value_t = 1_000_000)]
    pub steps: usize,
    /// Transitions discarded before recording.
    #[arg(long, global = true, value_name = "N", default_value_t = BURN_IN)]
    pub burn_in: usize,
    #[arg(long, global = true, value_name = "S", default_value_t = 0)]
    pub seed: u64,
    /// Cycle whose returning cone holds the initial point (default: first active).
    #[arg(long, global = true, value_name = "LABEL")]
    pub start: Option<String>,
    /// Single block length.
    #[arg(long, global = true, value_name = "N", conflicts_with = "block_range")]
    pub block_len: Option<usize>,
    /// Block lengths A through B.
    #[arg(long, global = true, value_name = "A:B", value_parser = parse_range)]
    pub block_range: Option<(usize, usize)>,
    /// Extra fit range A:B reported alongside the full and tail fits.
    #[arg(long, global = true, value_name = "A:B", value_parser = parse_range)]
    pub fit_range: Option<(usize, usize)>,
    /// Symbol sequence written by `simulate` (`.u16` files are binary).
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Block counts CSV written by `blocks`.
    #[arg(long, global = true, value_name = "PATH")]
    pub counts: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file (default: standard output).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "T", env = "GLASS_ENTROPY_THREADS")]
    pub threads: Option<usize>,
}

impl Options {
    pub fn block_lengths(&self) -> (usize, usize) {
        match (self.block_len, self.block_range) {
            (Some(n), _) => (n, n),
            (None, Some(r)) => r,
            (None, None) => (1, 120),
        }
    }
}

pub fn parse_range(text: &str) -> Result<(usize, usize), String> {
    let (a, b) = text.split_once(':').ok_or_else(|| format!("expected A:B, got {text:?}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a == 0 || a > b {
        return Err(format!("range {text:?} must satisfy 1 <= A <= B"));
    }
    Ok((a, b))
}
