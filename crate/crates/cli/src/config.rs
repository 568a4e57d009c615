//! Argument definitions, validation, and the normalized run configuration.

use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;
use tilefact::factor::FactorKind;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unusable inputs; exit code 2.
    Usage(String),
    /// Numerical or kernel failure, or a failed check; exit code 1.
    Failure(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Failure(msg) => f.write_str(msg),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn failure(msg: impl Into<String>) -> CliError {
    CliError::Failure(msg.into())
}

fn parse_kind(s: &str) -> Result<FactorKind, String> {
    match s {
        "chol" => Ok(FactorKind::Cholesky),
        "qr" => Ok(FactorKind::Qr),
        "lu" => Ok(FactorKind::Lu),
        other => Err(format!("unknown kind {other}; expected chol, qr or lu")),
    }
}

/// Comma-separated list of counts, e.g. `1,2,4,8`.
#[derive(Debug, Clone)]
pub struct NumList(pub Vec<usize>);

impl std::str::FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|tok| tok.trim().parse::<usize>().map_err(|_| format!("bad list entry {tok}")))
            .collect::<Result<Vec<usize>, String>>()
            .map(NumList)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "tilefact",
    about = "Tiled Cholesky/QR/LU factorizations on a graph-driven asynchronous runtime",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one factorization on a generated matrix.
    Factor(FactorArgs),
    /// Timing sweeps over sizes and thread counts.
    Bench(BenchArgs),
    /// Backward-error experiments for the elimination variants.
    Stability(StabilityArgs),
    /// Dump a factorization's task graph as text.
    Dag(DagArgs),
}

#[derive(Args, Debug)]
pub struct FactorArgs {
    /// Factorization kind: chol, qr or lu.
    #[arg(long, value_parser = parse_kind)]
    pub kind: FactorKind,
    /// Row count; defaults to the column count.
    #[arg(long)]
    pub m: Option<usize>,
    /// Column count.
    #[arg(long)]
    pub n: usize,
    /// Tile size.
    #[arg(long)]
    pub b: usize,
    /// Inner block size; defaults to the tile size.
    #[arg(long)]
    pub s: Option<usize>,
    /// Worker count; defaults to TILEFACT_THREADS or 1.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Seed for the generated matrix.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Verify the factors against their reconstruction oracles.
    #[arg(long)]
    pub check: bool,
    /// Write the execution trace CSV here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also report the block-layout conversion time, which is excluded from
    /// the factorization timing.
    #[arg(long)]
    pub layout_cost: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Factorization kind: chol, qr or lu.
    #[arg(long, value_parser = parse_kind)]
    pub kind: FactorKind,
    /// Single problem size (column count).
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated problem sizes.
    #[arg(long)]
    pub n_list: Option<NumList>,
    /// Row count; defaults to the column count per cell.
    #[arg(long)]
    pub m: Option<usize>,
    /// Tile size.
    #[arg(long)]
    pub b: usize,
    /// Inner block size; defaults to the tile size.
    #[arg(long)]
    pub s: Option<usize>,
    /// Single worker count.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Comma-separated worker counts.
    #[arg(long)]
    pub threads_list: Option<NumList>,
    /// Timed repetitions per cell (one extra warmup run is discarded).
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Weak scaling: grow the problem with the worker count.
    #[arg(long)]
    pub weak: bool,
    /// Per-worker local size for weak scaling: n = nloc * sqrt(threads),
    /// rounded up to a tile multiple.
    #[arg(long)]
    pub nloc: Option<usize>,
    /// Write the per-repetition CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    /// Experiment: random or mtx.
    #[arg(long)]
    pub experiment: String,
    /// Matrix order for the random campaign.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated tile counts for the random campaign.
    #[arg(long)]
    pub p_list: Option<NumList>,
    /// Matrices per tile count in the random campaign.
    #[arg(long, default_value_t = 10)]
    pub sample: usize,
    /// Minimum tile count per side for the file campaign.
    #[arg(long, default_value_t = 32)]
    pub p: usize,
    /// Directory of .mtx files for the file campaign.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Write the report CSV here (the file campaign also writes
    /// `<out>.hist.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DagArgs {
    /// Factorization kind: chol, qr or lu.
    #[arg(long, value_parser = parse_kind)]
    pub kind: FactorKind,
    /// Tile rows.
    #[arg(long)]
    pub p: usize,
    /// Tile columns; defaults to p (always p for chol).
    #[arg(long)]
    pub q: Option<usize>,
    /// Tile size recorded in the plan.
    #[arg(long, default_value_t = 8)]
    pub b: usize,
    /// Inner block size; defaults to the tile size.
    #[arg(long)]
    pub s: Option<usize>,
    /// Write the dump here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Worker count from the flag, the TILEFACT_THREADS environment variable, or
/// one.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    let threads = match flag {
        Some(t) => t,
        None => match std::env::var("TILEFACT_THREADS") {
            Ok(v) => v
                .parse::<usize>()
                .map_err(|_| usage(format!("TILEFACT_THREADS is not a count: {v}")))?,
            Err(_) => 1,
        },
    };
    if threads == 0 {
        return Err(usage("thread count must be at least 1"));
    }
    Ok(threads)
}

/// Optional per-core peak rate (Gflop/s) used to flag implausible
/// measurements, from TILEFACT_PEAK_PER_CORE.
pub fn peak_per_core() -> Option<f64> {
    std::env::var("TILEFACT_PEAK_PER_CORE").ok().and_then(|v| v.parse().ok())
}

/// Checks the divisibility requirements shared by every run.
pub fn validate_shape(m: usize, n: usize, b: usize, s: usize) -> Result<(), CliError> {
    if m == 0 || n == 0 || b == 0 || s == 0 {
        return Err(usage("sizes must be positive"));
    }
    if !m.is_multiple_of(b) || !n.is_multiple_of(b) {
        return Err(usage(format!("tile size {b} must divide the matrix dimensions {m}x{n}")));
    }
    if !b.is_multiple_of(s) {
        return Err(usage(format!("inner block size {s} must divide the tile size {b}")));
    }
    Ok(())
}
