use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shufflab::experiment::{self, Command as ExpCommand, ExperimentSpec, SweepGrid};
use shufflab::sim::Structure;
use shufflab::strategies::StrategyKind;

#[derive(Parser)]
#[command(name = "shufflab", about = "Ball-shuffling and dynamic-index experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output artifact path.
    #[arg(long, default_value = "out.csv")]
    out: PathBuf,
    /// Seed for all randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parallel workers for sweeps.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a shuffling strategy and write its op sequence.
    ShuffleRun {
        /// naive | greedy | grouped | cascade
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        t: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exact optimal cost with a witness schedule.
    ShuffleOracle {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        t: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate the analytic lower bounds for one cell.
    ShuffleBounds {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        t: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Simulate an index structure on a synthetic workload.
    IndexRun {
        /// sorted_run | lsm | stepped_merge
        #[arg(long)]
        structure: String,
        #[arg(long, id = "B")]
        block: usize,
        #[arg(long, id = "M")]
        memory: usize,
        #[arg(long)]
        ell: usize,
        #[arg(long, id = "N")]
        inserts: u64,
        /// Distinct query ranges sampled from the seed.
        #[arg(long, default_value_t = 16)]
        queries: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Grouped workload, simulation, and certificate extraction.
    Reduce {
        #[arg(long)]
        structure: String,
        #[arg(long, id = "B")]
        block: usize,
        #[arg(long, id = "M")]
        memory: usize,
        #[arg(long)]
        ell: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Grid sweep. Shuffle mode with --n/--t, index mode with --ell/--inserts.
    Sweep {
        /// Ball counts: `lo..hi` or comma list.
        #[arg(long)]
        n: Option<String>,
        /// Bin counts: `lo..hi` or comma list.
        #[arg(long)]
        t: Option<String>,
        /// Fanouts for index mode.
        #[arg(long)]
        ell: Option<String>,
        /// Structures for index mode (comma list).
        #[arg(long)]
        structure: Option<String>,
        #[arg(long, id = "B", default_value_t = 0)]
        block: usize,
        #[arg(long, id = "M", default_value_t = 0)]
        memory: usize,
        /// Insert counts for index mode: `lo..hi` or comma list.
        #[arg(long)]
        inserts: Option<String>,
        #[arg(long, default_value_t = 16)]
        queries: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    StrategyKind::parse(s).ok_or_else(|| format!("unknown strategy {s:?}"))
}

fn parse_structure(s: &str) -> Result<Structure, String> {
    Structure::parse(s).ok_or_else(|| format!("unknown structure {s:?}"))
}

fn parse_list(label: &str, s: &Option<String>) -> Result<Vec<u64>, String> {
    match s {
        None => Ok(Vec::new()),
        Some(raw) => {
            experiment::parse_values(raw).ok_or_else(|| format!("bad {label} range {raw:?}"))
        }
    }
}

fn build_spec(cli: Cli) -> Result<ExperimentSpec, String> {
    let (command, common) = match cli.command {
        Command::ShuffleRun {
            strategy,
            n,
            t,
            common,
        } => (
            ExpCommand::ShuffleRun {
                strategy: parse_strategy(&strategy)?,
                n,
                t,
            },
            common,
        ),
        Command::ShuffleOracle { n, t, common } => (ExpCommand::ShuffleOracle { n, t }, common),
        Command::ShuffleBounds { n, t, common } => (ExpCommand::ShuffleBounds { n, t }, common),
        Command::IndexRun {
            structure,
            block,
            memory,
            ell,
            inserts,
            queries,
            common,
        } => (
            ExpCommand::IndexRun {
                structure: parse_structure(&structure)?,
                block_capacity: block,
                memory_capacity: memory,
                fanout: ell,
                inserts,
                queries,
            },
            common,
        ),
        Command::Reduce {
            structure,
            block,
            memory,
            ell,
            common,
        } => (
            ExpCommand::Reduce {
                structure: parse_structure(&structure)?,
                block_capacity: block,
                memory_capacity: memory,
                fanout: ell,
            },
            common,
        ),
        Command::Sweep {
            n,
            t,
            ell,
            structure,
            block,
            memory,
            inserts,
            queries,
            common,
        } => {
            let structures = match structure {
                None => Vec::new(),
                Some(raw) => raw
                    .split(',')
                    .map(|tok| parse_structure(tok.trim()))
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let grid = SweepGrid {
                n: parse_list("n", &n)?,
                t: parse_list("t", &t)?.into_iter().map(|v| v as usize).collect(),
                ell: parse_list("ell", &ell)?.into_iter().map(|v| v as usize).collect(),
                structures,
                block_capacity: block,
                memory_capacity: memory,
                inserts: parse_list("inserts", &inserts)?,
                queries,
            };
            (ExpCommand::Sweep(grid), common)
        }
    };
    Ok(ExperimentSpec {
        command,
        out: common.out,
        seed: common.seed,
        jobs: common.jobs,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let spec = match build_spec(cli) {
        Ok(spec) => spec,
        Err(msg) => {
            eprintln!("{}", serde_json::json!({ "error": msg }));
            return ExitCode::FAILURE;
        }
    };
    match experiment::run(&spec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
