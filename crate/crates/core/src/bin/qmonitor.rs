use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qmonitor_core::cli::{
    cmd_ensemble, cmd_simulate, cmd_sweep, exit_code, parse_lambdas, resolve_config, CommonOptions,
    DEFAULT_LAMBDAS,
};
use qmonitor_core::ensemble::RuleSelection;
use qmonitor_core::error::Error;

/// Continuous energy monitoring of a driven two-level system coupled to a thermal bath.
#[derive(Debug, Parser)]
#[command(name = "qmonitor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate, measure and reconstruct a single trajectory.
    Simulate(Common),
    /// Run an ensemble and report pointwise omega_m statistics and the FT estimate.
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// Number of trajectories (defaults to n_trajectories from the config).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fluctuation-theorem estimates across several quality factors.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Trajectories per quality factor (defaults to n_trajectories from the config)
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated quality factors in units of 1/(hbar omega0) [default: 1e2,1e3,1e4,1e5,1e6]
        #[arg(long)]
        lambdas: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Rule {
    Naive,
    Corrected,
    Both,
}

#[derive(Debug, Args)]
struct Common {
    /// Key-value configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    rule: Rule,
    /// Overrides master_seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn options(&self) -> CommonOptions {
        CommonOptions {
            config: self.config.clone(),
            out: self.out.clone(),
            rule: match self.rule {
                Rule::Naive => RuleSelection::Naive,
                Rule::Corrected => RuleSelection::Corrected,
                Rule::Both => RuleSelection::Both,
            },
            seed: self.seed,
            workers: self.workers,
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (common, n, lambdas) = match &cli.command {
        Command::Simulate(c) => (c, None, None),
        Command::Ensemble { common, n } => (common, *n, None),
        Command::Sweep { common, n, lambdas } => (common, *n, lambdas.as_deref()),
    };
    let opts = common.options();
    let (cfg, warnings) = resolve_config(opts.config.as_deref(), opts.seed)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let n = n.unwrap_or(cfg.n_trajectories);
    let manifest = match cli.command {
        Command::Simulate(_) => cmd_simulate(&cfg, &opts)?,
        Command::Ensemble { .. } => cmd_ensemble(&cfg, n, &opts)?,
        Command::Sweep { .. } => {
            let lambdas = match lambdas {
                Some(list) => parse_lambdas(list)?,
                None => DEFAULT_LAMBDAS.to_vec(),
            };
            cmd_sweep(&cfg, &lambdas, n, &opts)?
        }
    };
    for o in &manifest.outputs {
        println!("{}  {}", o.sha256, opts.out.join(&o.path).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
