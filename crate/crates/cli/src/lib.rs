//! Batch experiment runner: builds staged constructions, runs samplers and
//! verification suites, and emits JSON structures plus CSV reports with a
//! hashed manifest.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod diagnose;
pub mod manifest;

#[derive(Debug, Parser)]
#[command(
    name = "invforge",
    version,
    about = "Staged constructions of exchangeable measures, with samplers and verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Finite staged construction from a seed structure, with tuple-type
    /// frequency reports.
    Toy(RunArgs),
    /// Inverse-limit run over tree addresses: exact bookkeeping checks,
    /// refined-pair decay, stage dumps, and samples.
    Limit(RunArgs),
    /// Check stored structure files against a class's axioms.
    Verify(VerifyArgs),
    /// Draw a sampled structure from a staged run or a stored graph.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Amalgamation class: graphs | triangle-free | kaleidoscope:graphs |
    /// kaleidoscope:triangle-free | metric
    #[arg(long, default_value = "graphs")]
    pub class: String,
    /// Highest stage to build.
    #[arg(long, default_value_t = 6)]
    pub stages: usize,
    /// Boundary depth for sampling and decay estimates (default: --stages).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Points per sampled structure (0 skips sampling).
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    /// Monte-Carlo trials per estimate.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Root seed; every random stream derives from it.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory for reports, dumps, and the manifest.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Report format: csv | json.
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Abort materialized stages larger than this.
    #[arg(long, default_value_t = invforge_core::toy::DEFAULT_ELEMENT_CAP)]
    pub element_cap: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Class whose axioms the files are checked against.
    #[arg(long)]
    pub class: String,
    /// Structure files in the canonical JSON schema.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Optional CSV report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Sample vertices i.i.d. from this stored graph instead of a staged run.
    #[arg(long)]
    pub from: Option<PathBuf>,
}

/// Run a parsed command line; the returned count is the number of failing
/// report rows.
pub fn dispatch(cli: &Cli) -> anyhow::Result<usize> {
    match &cli.cmd {
        Cmd::Toy(args) => commands::cmd_toy(args),
        Cmd::Limit(args) => commands::cmd_limit(args),
        Cmd::Verify(args) => {
            commands::cmd_verify(&args.class, &args.files, args.out.as_deref())
        }
        Cmd::Sample(args) => commands::cmd_sample(&args.run, args.from.as_deref()),
    }
}

/// Exit-code contract: 0 all rows pass, 1 verification failure, 2 bad
/// configuration or unreadable input, 3 stage budget exceeded.
pub fn exit_code(result: &anyhow::Result<usize>) -> u8 {
    match result {
        Ok(0) => 0,
        Ok(_) => 1,
        Err(e) => match e.downcast_ref::<invforge_core::Error>() {
            Some(invforge_core::Error::StageBudgetExceeded(_)) => 3,
            _ => 2,
        },
    }
}
