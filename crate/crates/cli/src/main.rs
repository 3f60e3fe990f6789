use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use semisup::corpus::DataFormat;
use semisup::selftrain::PoolMix;

mod commands;
mod config;
mod data;
mod error;
mod output;

use commands::{Run, SelftrainArgs, SynthArgs};
use error::{CliError, EXIT_OK, EXIT_VALIDATION};

/// Self-training and task augmentation for few-shot text classification.
#[derive(Parser)]
#[command(name = "semisup", version)]
struct Cli {
    /// TOML config; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set experiment.restarts=3`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Override experiment.master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    /// Check the config and inputs, then exit without writing anything.
    #[arg(long, global = true)]
    validate_only: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate filtered synthetic auxiliary data and the base model f0.
    Augment,
    /// Self-train from f0 (or fresh parameters) on one split.
    Selftrain {
        #[arg(long)]
        f0: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Broad)]
        mode: ModeArg,
        /// Examples added per iteration by confidence filtering.
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long, value_enum, default_value_t = PoolArg::In)]
        pool: PoolArg,
        /// Out-of-domain corpus for `--pool out` and `--pool in+out`.
        #[arg(long)]
        ood: Option<PathBuf>,
    },
    /// Run all arms over all restarts.
    Experiment {
        /// Few-shot sizes, e.g. `--sweep 8,32,128`.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<usize>,
        /// Add a full-data reference run to the sweep.
        #[arg(long)]
        reference: bool,
    },
    /// Write a synthetic task as train/test files.
    Synth {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        test_size: Option<usize>,
        #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
        format: FormatArg,
    },
    /// Resolve the config and its datasets.
    Validate {
        /// Print the resolved config as TOML.
        #[arg(long)]
        print: bool,
        /// Print the default config as TOML.
        #[arg(long)]
        print_defaults: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Broad,
    ConfidenceFilter,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolArg {
    In,
    Out,
    #[value(name = "in+out")]
    InOut,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Tsv,
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    if let Command::Validate { print_defaults: true, .. } = cli.command {
        println!("{}", config::Config::default().to_toml()?);
        return Ok(EXIT_OK);
    }
    let config = config::load(cli.config.as_deref(), &cli.set, cli.seed)?;
    let name = match &cli.command {
        Command::Augment => "augment",
        Command::Selftrain { .. } => "selftrain",
        Command::Experiment { .. } => "experiment",
        Command::Synth { .. } => "synth",
        Command::Validate { .. } => "validate",
    };
    let run = Run {
        config,
        out: cli.out.unwrap_or_else(|| commands::default_out(name)),
        quiet: cli.quiet,
        validate_only: cli.validate_only,
    };
    match cli.command {
        Command::Augment => commands::augment(&run),
        Command::Selftrain { f0, mode, batch, max_iterations, pool, ood } => commands::selftrain(
            &run,
            &SelftrainArgs {
                f0,
                confidence_filter: matches!(mode, ModeArg::ConfidenceFilter),
                batch,
                max_iterations,
                pool: match pool {
                    PoolArg::In => PoolMix::InOnly,
                    PoolArg::Out => PoolMix::OutOnly,
                    PoolArg::InOut => PoolMix::InPlusOut,
                },
                ood,
            },
        ),
        Command::Experiment { sweep, reference } => commands::experiment(&run, &sweep, reference),
        Command::Synth { family, train_size, test_size, format } => commands::synth(
            &run,
            &SynthArgs {
                family,
                train_size,
                test_size,
                format: match format {
                    FormatArg::Jsonl => DataFormat::Jsonl,
                    FormatArg::Tsv => DataFormat::Tsv,
                },
            },
        ),
        Command::Validate { print, .. } => commands::validate(&run, print),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::validation("usage", e.render().to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit
        }
    };
    ExitCode::from(code as u8)
}
