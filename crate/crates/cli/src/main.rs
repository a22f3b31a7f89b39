//! `aqmp`: encode, decode and evaluate images with the AQMP codec, run
//! parameter sweeps and hyperparameter studies.
//!
//! Machine-readable results go to stdout as JSON lines or to CSV files;
//! human-readable messages go to stderr.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use aqmp_core::hpo::SamplerKind;
use aqmp_core::ColorMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "aqmp", version, about = "Adaptive quadtree matching pursuit image codec")]
struct Cli {
    /// Worker threads for the codec (default: all cores). AQMP_THREADS
    /// takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress a PNG into an .aqmp file.
    Encode(EncodeArgs),
    /// Reconstruct a PNG from an .aqmp file.
    Decode(DecodeArgs),
    /// SSIM between two PNGs (on luma for color images).
    Eval(EvalArgs),
    /// Evaluate every combination of the given parameter lists.
    Sweep(SweepArgs),
    /// Search codec parameters with TPE or random sampling.
    Optimize(OptimizeArgs),
    /// Merge study, sweep and external JPEG results into one CSV.
    Report(ReportArgs),
    /// Render the dictionary atoms of one block size as a PNG mosaic.
    Atoms(AtomsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OriginalSizeArg {
    /// Size of the uncompressed samples (width x height x channels).
    Raw,
    /// Size of the input file.
    File,
}

#[derive(Debug, Args)]
pub struct CodecArgs {
    /// Squared-residual tolerance per block, pixels in [0, 1].
    #[arg(long, default_value_t = 0.01)]
    pub max_error: f64,
    /// Atom budget as a fraction of the block's pixel count.
    #[arg(long, default_value_t = 0.25)]
    pub min_sparsity: f64,
    #[arg(long, default_value_t = 4)]
    pub min_n: usize,
    #[arg(long, default_value_t = 32)]
    pub max_n: usize,
    /// Dictionary atoms per block size.
    #[arg(long, default_value_t = 64)]
    pub a_cols: usize,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[command(flatten)]
    pub codec: CodecArgs,
    /// gray, ycbcr or rgb (default: gray for gray images, ycbcr otherwise).
    #[arg(long)]
    pub mode: Option<ColorMode>,
    /// What the compression rate divides by.
    #[arg(long, value_enum, default_value_t = OriginalSizeArg::File)]
    pub original_size: OriginalSizeArg,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub original: PathBuf,
    pub reconstructed: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub max_error: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.25")]
    pub min_sparsity: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub min_n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "32")]
    pub max_n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub a_cols: Vec<usize>,
    #[arg(long)]
    pub mode: Option<ColorMode>,
    #[arg(long, value_enum, default_value_t = OriginalSizeArg::File)]
    pub original_size: OriginalSizeArg,
    /// Write 0 in the seconds column so identical runs give identical files.
    #[arg(long)]
    pub omit_timing: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = SamplerKind::Tpe)]
    pub sampler: SamplerKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub mode: Option<ColorMode>,
    #[arg(long, value_enum, default_value_t = OriginalSizeArg::File)]
    pub original_size: OriginalSizeArg,
    /// Continue the study already stored in OUTPUT.
    #[arg(long)]
    pub resume: bool,
    /// Fraction of trials treated as good by TPE.
    #[arg(long, default_value_t = 0.25)]
    pub gamma: f64,
    /// Candidates scored per TPE suggestion.
    #[arg(long, default_value_t = 24)]
    pub candidates: usize,
    /// Random trials before TPE starts modelling.
    #[arg(long, default_value_t = 10)]
    pub startup: usize,
    /// Write 0 in the seconds column so identical runs give identical files.
    #[arg(long)]
    pub omit_timing: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output CSV with columns source, cr, ssim, pareto.
    pub output: PathBuf,
    /// Study or sweep CSVs written by this tool.
    #[arg(long = "study")]
    pub studies: Vec<PathBuf>,
    /// External CSVs with `cr` and `ssim` columns, e.g. JPEG at several
    /// quality levels.
    #[arg(long = "jpeg")]
    pub jpeg: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AtomsArgs {
    pub output: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub a_cols: usize,
    /// Pixel replication factor.
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
}

fn configure_threads(flag: Option<usize>) -> CliResult {
    let from_env = match std::env::var("AQMP_THREADS") {
        Ok(v) => {
            Some(v.trim().parse::<usize>().map_err(|_| CliError::usage(format!("AQMP_THREADS={v} is not a number")))?)
        }
        Err(_) => None,
    };
    if let Some(n) = from_env.or(flag) {
        if n == 0 {
            return Err(CliError::usage("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Encode(a) => commands::encode(a),
        Command::Decode(a) => commands::decode(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Report(a) => commands::report(a),
        Command::Atoms(a) => commands::atoms(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aqmp: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
