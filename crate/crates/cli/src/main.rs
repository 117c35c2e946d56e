#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{CliError, Context, Outcome};
use config::RawConfig;

#[derive(Parser)]
#[command(name = "isoblock", version, about = "Isolating blocks for multivalued semiflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out` in the config; default `.`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Omit wall-clock fields so reruns are byte-identical.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory.
    Simulate(Common),
    /// List equilibria and their invariants.
    Equilibria(Common),
    /// Build and verify an isolating block.
    Block(Common),
    /// Label the boundary points given by `points`.
    Classify(Common),
    /// Run a verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        suite: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(Outcome, PathBuf), CliError> {
    let (common, suite) = match &cli.command {
        Command::Simulate(c) | Command::Equilibria(c) | Command::Block(c) | Command::Classify(c) => (c, None),
        Command::Verify { common, suite } => (common, suite.as_deref()),
    };
    let raw = RawConfig::load(&common.config)?;
    let seed = match common.seed {
        Some(s) => s,
        None => raw.u64_or("seed", 0)?,
    };
    let out = common.out.clone().or_else(|| raw.str("out").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    let ctx = Context { raw, seed, deterministic: common.deterministic };
    let outcome = match &cli.command {
        Command::Simulate(_) => commands::simulate(&ctx),
        Command::Equilibria(_) => commands::equilibria(&ctx),
        Command::Block(_) => commands::block(&ctx),
        Command::Classify(_) => commands::classify(&ctx),
        Command::Verify { .. } => commands::verify(&ctx, suite),
    }?;
    Ok((outcome, out))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok((outcome, dir)) => {
            if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| outcome.outputs.commit(&dir)) {
                eprintln!("error: writing outputs to {}: {e}", dir.display());
                return ExitCode::from(3);
            }
            println!("{}", outcome.summary);
            ExitCode::from(if outcome.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
