use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use comexp_core::model::CommunityInstance;
use comexp_experiments::config::{ExperimentConfig, ExperimentKind, Overrides};
use comexp_experiments::error::{ExpError, Result};
use comexp_experiments::report::write_json;
use comexp_experiments::runners;

/// Community exploration: offline allocation, adaptive policies and online
/// learning experiments.
#[derive(Debug, Parser)]
#[command(name = "comexp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Instance {
    /// Community sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<u32>,
    /// Exploration budget K.
    #[arg(long)]
    budget: usize,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's replication count.
    #[arg(long)]
    replications: Option<usize>,
    /// Overrides the config's horizon.
    #[arg(long)]
    horizon: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::load(&self.config)?;
        c.apply(Overrides {
            seed: self.seed,
            replications: self.replications,
            horizon: self.horizon,
        });
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal non-adaptive budget allocation.
    Allocate {
        #[command(flatten)]
        instance: Instance,
        /// Start from the rounded lower bound and finish greedily.
        #[arg(long)]
        fast: bool,
    },
    /// Exact expected reward of the adaptive greedy policy.
    AdaptiveReward {
        #[command(flatten)]
        instance: Instance,
    },
    /// Exhaustive enumeration and value iteration on a small instance.
    Oracle {
        #[command(flatten)]
        instance: Instance,
    },
    /// Runs the experiment described by a config and writes its table into a directory.
    Experiment {
        #[command(flatten)]
        run: RunArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs a regret study; CSV goes to the config's output path or stdout.
    Regret {
        #[command(flatten)]
        run: RunArgs,
        /// Output file, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn instance(args: &Instance) -> Result<CommunityInstance> {
    Ok(CommunityInstance::new(args.sizes.clone())?)
}

fn stdout_json<T: serde::Serialize>(value: &T) -> Result<()> {
    write_json(std::io::stdout().lock(), value)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Allocate { instance: a, fast } => {
            stdout_json(&runners::run_allocate(&instance(&a)?, a.budget, fast)?)
        }
        Command::AdaptiveReward { instance: a } => stdout_json(
            &runners::run_adaptive_reward_exact(&instance(&a)?, a.budget)?,
        ),
        Command::Oracle { instance: a } => {
            stdout_json(&runners::run_oracle(&instance(&a)?, a.budget)?)
        }
        Command::Experiment { run, out } => {
            let config = run.load()?;
            let path = runners::run_to_dir(&config, &out)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        Command::Regret { run, out } => {
            let config = run.load()?;
            if config.kind != ExperimentKind::Regret {
                return Err(ExpError::Config(format!(
                    "regret needs a config of kind regret, got {}",
                    config.kind.file_stem()
                )));
            }
            let target = out.or_else(|| config.output.clone().map(PathBuf::from));
            match target {
                Some(path) => runners::write_table(&config, std::fs::File::create(path)?),
                None => {
                    let mut lock = std::io::stdout().lock();
                    runners::write_table(&config, &mut lock)?;
                    lock.flush()?;
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("comexp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
