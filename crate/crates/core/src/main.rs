use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use saturated::experiment::{run_selected, Operation};
use saturated::verify::{verify_suite, Tier};
use saturated::Error;

#[derive(Parser)]
#[command(name = "saturated", version, about = "Entropy experiments on lattice subshifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TierArg {
    Quick,
    Full,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `out/<config stem>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-tilings, disjointification and decomposition records.
    Tile(RunArgs),
    /// Upper-capacity and Θ estimates.
    Entropy(RunArgs),
    /// Generic-point synthesis with its certificate.
    Generic(RunArgs),
    /// Birkhoff spectrum against the closed form.
    Spectrum(RunArgs),
    /// Acceptance suite.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        tier: TierArg,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Writes `verify.jsonl` here when given.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(args: RunArgs, keep: fn(&Operation) -> bool) -> ExitCode {
    let out = args.out.unwrap_or_else(|| {
        let stem = args.config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        PathBuf::from("out").join(stem)
    });
    match run_selected(&args.config, args.seed, &out, keep) {
        Ok(status) => {
            eprintln!("records written to {}", out.display());
            ExitCode::from(status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::BudgetExceeded(_) => 4,
                Error::Schema(_) | Error::Io(_) => 2,
                _ => 3,
            })
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Tile(a) => run(a, |op| matches!(op, Operation::Tile { .. })),
        Command::Entropy(a) => run(a, |op| matches!(op, Operation::UpperCapacity { .. } | Operation::Theta { .. })),
        Command::Generic(a) => run(a, |op| matches!(op, Operation::Generic { .. })),
        Command::Spectrum(a) => run(a, |op| matches!(op, Operation::Spectrum { .. })),
        Command::Verify { tier, seed, out } => {
            let tier = match tier {
                TierArg::Quick => Tier::Quick,
                TierArg::Full => Tier::Full,
            };
            let report = verify_suite(tier, seed);
            for r in &report.results {
                println!("{}", r.line());
            }
            if let Some(dir) = out {
                let body: String = report.records().iter().map(|r| format!("{r}\n")).collect();
                if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("verify.jsonl"), body)) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
