use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod failure;

use failure::Failure;

#[derive(Parser)]
#[command(
    name = "squats",
    version,
    about = "Group-testing serial quantization of sparse sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a codebook and write it to `<out>/codebook.sqc`.
    GenCodebook(Common),
    /// Encode one sequence into a register.
    Encode(Common),
    /// Decode a register back into a sequence.
    Decode(Common),
    /// Run a Monte Carlo rate sweep.
    Bench(Common),
    /// Simulate distributed encoding over an OR network.
    NetSim(Common),
}

#[derive(Args, Clone)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 lets the pool decide. `SQUATS_THREADS` takes
    /// precedence.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value = "csv")]
    pub format: String,
}

type Runner = fn(&Common) -> Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, Runner) = match &cli.command {
        Command::GenCodebook(c) => (c, commands::gen_codebook),
        Command::Encode(c) => (c, commands::encode),
        Command::Decode(c) => (c, commands::decode),
        Command::Bench(c) => (c, commands::bench),
        Command::NetSim(c) => (c, commands::net_sim),
    };
    let outcome = thread_count(common.threads)
        .and_then(init_threads)
        .and_then(|()| run(common));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("squats: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn thread_count(flag: usize) -> Result<usize, Failure> {
    match std::env::var("SQUATS_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("SQUATS_THREADS must be a thread count, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn init_threads(threads: usize) -> Result<(), Failure> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))
}
