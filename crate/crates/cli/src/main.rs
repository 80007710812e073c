use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use exwarp_cli::commands;
use exwarp_cli::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "exwarp", version, about = "Warp/extrapolate temporal supersampling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the scene suite into dataset directories.
    Generate(Common),
    /// Run one policy and write traces and reports.
    Run(Common),
    /// Train the Q-network and write a checkpoint.
    Train(Common),
    /// Leave-one-family-out cross-validation.
    Evaluate(Common),
    /// Run several policies side by side.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// S1..S6, oracle or trained:<checkpoint>
    #[arg(long)]
    policy: Option<String>,
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    commands::configure_threads()?;
    let (name, c) = match &cli.command {
        Command::Generate(c) => ("generate", c),
        Command::Run(c) => ("run", c),
        Command::Train(c) => ("train", c),
        Command::Evaluate(c) => ("evaluate", c),
        Command::Compare(c) => ("compare", c),
    };
    let ov = Overrides {
        seed: c.seed,
        out: c.out.clone(),
        policy: c.policy.clone(),
    };
    let cfg = RunConfig::load(c.config.as_deref(), &ov)?;
    cfg.validate()?;
    match name {
        "generate" => commands::cmd_generate(&cfg),
        "run" => commands::cmd_run(&cfg),
        "train" => commands::cmd_train(&cfg),
        "evaluate" => commands::cmd_evaluate(&cfg),
        _ => commands::cmd_compare(&cfg),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
