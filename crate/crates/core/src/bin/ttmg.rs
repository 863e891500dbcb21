use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use clap::{Args, Parser, Subcommand};

use ttmg::config::RunConfig;
use ttmg::harness::{cmd_rank_study, cmd_solve, cmd_validate, ExitCode};
use ttmg::Error;

/// Tensor-train multigrid for stationary distributions of Kronecker-structured
/// Markov chains.
#[derive(Parser)]
#[command(name = "ttmg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the model and hierarchy, run V-cycles, write reports.
    Solve(Common),
    /// Compare assembly and solution with the dense oracles.
    Validate(Common),
    /// Accuracy of rank-R truncations of a reference solution.
    RankStudy(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `section.key=value`, applied in order.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::from_path(&self.config, &self.overrides)?;
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn main() -> ProcessExit {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Solve(c) | Command::Validate(c) | Command::RankStudy(c) => c,
    };
    let cfg = match common.load() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("ttmg: {e}");
            return ProcessExit::from(ExitCode::ConfigError.code() as u8);
        }
    };
    let out = cfg.output.dir.clone();
    let mut log = std::io::stderr();
    let result = match cli.command {
        Command::Solve(_) => cmd_solve(&cfg, &out, &mut log),
        Command::Validate(_) => cmd_validate(&cfg, &mut std::io::stdout()),
        Command::RankStudy(_) => cmd_rank_study(&cfg, &out, &mut log),
    };
    match result {
        Ok(code) => ProcessExit::from(code.code() as u8),
        Err(e) => {
            eprintln!("ttmg: {e}");
            let code = match e {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::ConfigError,
                _ => ExitCode::NotConverged,
            };
            ProcessExit::from(code.code() as u8)
        }
    }
}
