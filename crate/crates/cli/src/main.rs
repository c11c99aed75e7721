//! `batchlpn`: sample LPN, run the EntLPN reduction, build μ*, and verify.

mod commands;
mod files;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "batchlpn", version, about = "Reduction from standard LPN to batch LPN with Santha-Vazirani noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a secret key sk ∈ F₂^n uniformly at random.
    Keygen(KeygenArgs),
    /// Draw samples of standard LPN_{n,δ}(sk) or batches of LPN_{n,p}(sk)
    /// with noise vector e ∼ p shared across the batch.
    Sample(SampleArgs),
    /// Apply EntLPN: every k samples of LPN_{n, 2^{k+2}δ}(sk) become one
    /// batch distributed as LPN_{n,p}(sk) for a δ-Santha-Vazirani source p.
    Reduce(ReduceArgs),
    /// Build the distribution μ* over affine coefficients with Aᵀμ* = q,
    /// so that F(z) for F ∼ μ* is Ber(q(z)) at every z.
    MuStar(MuStarArgs),
    /// Check the reduction exactly or statistically, certify the structure
    /// of the parity matrix B, or report the common-coin counterexample.
    Verify(VerifyArgs),
    /// Re-run the invocation recorded in a run manifest and compare digests.
    Replay(ReplayArgs),
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct KeygenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Standard,
    Batch,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub mode: SampleMode,
    /// Defaults to the length of the secret key.
    #[arg(long)]
    pub n: Option<usize>,
    /// Batch size; defaults to the arity of --p.
    #[arg(long)]
    pub k: Option<usize>,
    /// Standard mode: noise level 1/2 - delta, given as NUM/DEN.
    #[arg(long)]
    pub delta: Option<String>,
    /// Batch mode: noise distribution file.
    #[arg(long)]
    pub p: Option<PathBuf>,
    #[arg(long)]
    pub sk: PathBuf,
    #[arg(long)]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReduceArgs {
    /// Target noise distribution over F₂^k.
    #[arg(long)]
    pub p: PathBuf,
    /// SV parameter of p as NUM/DEN, below 2^{-(k+3)}.
    #[arg(long)]
    pub delta: String,
    /// Standard LPN samples, one JSON object per line.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct MuStarArgs {
    /// Bias function q: F₂^k → [1/2 - 2^{-(k+3)}, 1/2 + 2^{-(k+3)}].
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    Exact,
    Statistical,
    Lemma2,
    Counterexample,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub mode: VerifyMode,
    #[arg(long)]
    pub n: Option<usize>,
    /// Arity of B in lemma2 mode.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub p: Option<PathBuf>,
    /// Exact mode checks every key when omitted.
    #[arg(long)]
    pub sk: Option<PathBuf>,
    /// Statistical mode: number of reduced batches to draw.
    #[arg(long)]
    pub count: Option<u64>,
    /// Statistical mode: test pre-generated batches instead of drawing them.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = batchlpn::verify::DEFAULT_SIGNIFICANCE)]
    pub significance: f64,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the regenerated output; a temporary file when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
