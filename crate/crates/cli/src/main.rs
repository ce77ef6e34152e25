use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use jitdrift::evaluate::DriftSpec;
use jitdrift::stats::Direction;
use jitdrift_cli::{cmd_baseline, cmd_detect, cmd_rank, cmd_score, cmd_synth, CliError, RunConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "jitdrift", version, about = "Concept-drift detection on commit-level defect streams")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Size of the worker pool (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Lower,
    Higher,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stream with known drift points.
    Synth {
        /// TOML drift specification.
        #[arg(short, long)]
        spec: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the configured detectors.
    Detect(RunArgs),
    /// Run the configured performance-monitor baselines.
    Baseline(RunArgs),
    /// Score detector reports against references and rank them.
    Score(RunArgs),
    /// Friedman-rank a score table (dataset rows, method columns).
    Rank {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long, value_enum)]
        direction: DirectionArg,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn load_run(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = std::env::current_dir().map(|cwd| cwd.join(dir)).unwrap_or_else(|_| dir.clone());
    }
    Ok(cfg)
}

fn load_spec(path: &PathBuf, seed: Option<u64>) -> Result<DriftSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
        path: path.clone(),
        source,
    })?;
    let mut spec: DriftSpec = toml::from_str(&text).map_err(|source| CliError::ConfigParse {
        path: path.clone(),
        source,
    })?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Synth { spec, out, seed } => cmd_synth(&load_spec(&spec, seed)?, &out),
        Command::Detect(args) => cmd_detect(&load_run(&args)?),
        Command::Baseline(args) => cmd_baseline(&load_run(&args)?),
        Command::Score(args) => cmd_score(&load_run(&args)?),
        Command::Rank {
            input,
            direction,
            output,
        } => {
            let direction = match direction {
                DirectionArg::Lower => Direction::LowerIsBetter,
                DirectionArg::Higher => Direction::HigherIsBetter,
            };
            cmd_rank(&input, direction, &output)
        }
    }
}

fn init(cli: &Cli) -> anyhow::Result<()> {
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init(&cli) {
        eprintln!("error: {e:#}");
        return ExitCode::from(4);
    }
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {:#}", anyhow::Error::new(e));
            ExitCode::from(code)
        }
    }
}
