use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lam_cli::driver::{self, CliError, Level, RunOptions};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(
    name = "lam",
    version,
    about = "Run λ-terms on L and three abstract machines, with audited refinements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a term on one level and print its normal form.
    Run {
        #[arg(long, value_enum, default_value = "l")]
        machine: Level,
        /// Step budget (τ and β steps alike).
        #[arg(long, default_value_t = 100_000)]
        fuel: usize,
        /// Print every state.
        #[arg(long, conflicts_with = "trace_json")]
        trace: bool,
        /// Write the trace as JSON.
        #[arg(long, value_name = "PATH")]
        trace_json: Option<String>,
        /// Audit each refinement from L down to the chosen machine.
        #[arg(long)]
        audit: bool,
        /// Write the compiled code, one command per line.
        #[arg(long, value_name = "PATH")]
        dump_code: Option<String>,
        /// Write the final heap (heap machine only).
        #[arg(long, value_name = "PATH")]
        dump_heap: Option<String>,
        /// Term file, or `-` for standard input.
        file: String,
    },
    /// Run all four levels and compare them.
    Diff {
        /// β-step budget per level.
        #[arg(long, default_value_t = 100_000)]
        fuel: usize,
        file: String,
    },
    /// Diff and audit random closed terms.
    Fuzz {
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Maximum term size.
        #[arg(long, default_value_t = 25)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// β budget for the diff and step budget for the audits.
        #[arg(long, default_value_t = 10_000)]
        fuel: usize,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let result = match command {
        Command::Run {
            machine,
            fuel,
            trace,
            trace_json,
            audit,
            dump_code,
            dump_heap,
            file,
        } => {
            let s = driver::parse_source(&driver::read_source(&file)?)?;
            let opts = RunOptions {
                fuel,
                trace,
                trace_json,
                audit,
                dump_code,
                dump_heap,
            };
            driver::run(&s, machine, &opts, &mut out).map(drop)
        }
        Command::Diff { fuel, file } => {
            let s = driver::parse_source(&driver::read_source(&file)?)?;
            driver::diff(&s, fuel, &mut out).map(drop)
        }
        Command::Fuzz {
            count,
            size,
            seed,
            fuel,
        } => driver::fuzz(count, size, seed, fuel, &mut out).map(drop),
    };
    out.flush()?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    std::panic::set_hook(Box::new(|info| eprintln!("lam: internal error: {info}")));
    match driver::with_big_stack(|| execute(cli.command)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lam: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
