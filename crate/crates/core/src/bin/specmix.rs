use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use specmix::cli::{error_record, parse_config, run, CommandName, Flags};
use specmix::Error;

#[derive(Parser)]
#[command(name = "specmix", version, about = "Coin measures with prescribed mixing profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Polynomial family construction with certified correlation bounds
    ConstructPoly(Common),
    /// Randomized search for asymptotically independent families
    ConstructGeneral(Common),
    /// Prime-indexed family realizing every profile at once
    ConstructPrimes(Common),
    /// Re-check a measure bundle
    Verify(Common),
    /// Weyl sums and discrepancy along a family
    Weyl(Common),
    /// Finite-resolution gluing of grid automorphisms
    Interpolate(Common),
    /// Wiener averages of a bundle's measures
    Wiener(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            // usage errors are operational failures, exit code 2 is reserved for violations
            eprintln!("{}", error_record(&Error::Parse(e.to_string().trim().to_string())));
            return ExitCode::from(1);
        }
    };
    let (name, common) = match cli.command {
        Command::ConstructPoly(c) => (CommandName::ConstructPoly, c),
        Command::ConstructGeneral(c) => (CommandName::ConstructGeneral, c),
        Command::ConstructPrimes(c) => (CommandName::ConstructPrimes, c),
        Command::Verify(c) => (CommandName::Verify, c),
        Command::Weyl(c) => (CommandName::Weyl, c),
        Command::Interpolate(c) => (CommandName::Interpolate, c),
        Command::Wiener(c) => (CommandName::Wiener, c),
    };
    let flags = Flags { out: common.out, eps: common.eps, jobs: common.jobs, seed: common.seed };
    match parse_config(name, common.config.as_deref(), &flags).and_then(|c| run(&c)) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
