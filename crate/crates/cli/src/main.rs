//! `tvar-pension`: solve the pension problem and emit its tables.

mod commands;
mod config;

use clap::{Parser, Subcommand, ValueEnum};
use config::{ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;
use tvar_pension::montecarlo::SweepParam;
use tvar_pension::Error;

const EXIT_NUMERIC: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_CONFIG: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "tvar-pension", version, about = "Optimal DC pension investment under a tail-VaR constraint and a floor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, default_value = "configs/default.toml")]
    config: PathBuf,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides a config value, e.g. `--set pension.alpha=0.15`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParamArg {
    Alpha,
    ZUnder,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Regime, multipliers and thresholds as JSON.
    Solve,
    /// Terminal surplus and wealth on a kernel grid (CSV).
    TerminalMap,
    /// Mean wealth and holdings along the time grid (CSV).
    Strategy,
    /// Terminal surplus histograms with and without the floor (CSV).
    Density,
    /// Mid-horizon portfolio proportions across parameter values (CSV).
    Sweep {
        #[arg(long, value_enum)]
        param: Option<ParamArg>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
}

enum Failure {
    Config(ConfigError),
    Model(Error),
    Io(std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let cfg = RunConfig::load(&cli.config, &cli.overrides)?;
    let model = cfg.model()??;
    for w in &model.market.warnings {
        eprintln!("warning: {w}");
    }
    let sol = model.solve()?;
    let sim = cfg.sim(cli.seed);
    Ok(match &cli.command {
        Command::Solve => commands::solve(&model, &sol),
        Command::TerminalMap => commands::terminal_map(&cfg, &model, &sol)?,
        Command::Strategy => commands::strategy(&cfg, &model, &sol, &sim)?,
        Command::Density => {
            let (table, notes) = commands::density(&cfg, &model, &sol, &sim)?;
            for n in notes {
                eprintln!("{n}");
            }
            table
        }
        Command::Sweep { param, values } => {
            let param = match param {
                Some(ParamArg::Alpha) => SweepParam::Alpha,
                Some(ParamArg::ZUnder) => SweepParam::ZUnder,
                None => cfg.sweep.param,
            };
            let values = values.clone().unwrap_or_else(|| cfg.sweep.values.clone());
            commands::sweep_table(&model, param, &values, &sim)?
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|doc| match &cli.out {
        Some(path) => std::fs::write(path, doc).map_err(Failure::Io),
        None => {
            print!("{doc}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Model(e)) => match e {
            Error::Infeasible { .. } => {
                eprintln!("infeasible: z̄ < R(z̲) ({e})");
                ExitCode::from(EXIT_INFEASIBLE)
            }
            Error::InfeasibleBudget { .. } => {
                eprintln!("infeasible: {e}");
                ExitCode::from(EXIT_INFEASIBLE)
            }
            Error::InvalidParameter { .. } | Error::NonPositivePremium { .. } => {
                eprintln!("config error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
            other => {
                eprintln!("error: {other}");
                ExitCode::from(EXIT_NUMERIC)
            }
        },
        Err(Failure::Io(e)) => {
            eprintln!("error: cannot write output: {e}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
