mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kbqa_core::{Method, RewardMode};

#[derive(Parser)]
#[command(name = "kbqa", version, about = "Tree-search question answering over a knowledge base")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct RunArgs {
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Questions as JSON lines.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Knowledge base as JSON lines.
    #[arg(long)]
    pub kb: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Overrides the config reward mode: rule, direct or random.
    #[arg(long)]
    pub reward_mode: Option<RewardMode>,
    /// `scripted:<script.json>`, `endpoint`, or `replay:<dir>`.
    #[arg(long, default_value = "endpoint")]
    pub agent: String,
    /// Record every backend exchange into this directory.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// MCTS over every question of a dataset.
    Search(RunArgs),
    /// A comparison method over every question.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        /// linear, linear-vote, bfs, dfs, random, random-select or mcts.
        #[arg(long)]
        strategy: Method,
    },
    /// Search for trajectories reaching the F1 threshold and export them.
    Annotate {
        #[command(flatten)]
        run: RunArgs,
        /// Annotate a per-type sample of this fraction of the dataset.
        #[arg(long)]
        sample_fraction: Option<f64>,
    },
    /// Metrics from a predictions file.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-depth spread of reward samples over searched nodes.
    RewardStats(RunArgs),
    /// Write the synthetic toy KB, dataset and agent script.
    MakeToy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search(run) => run::search(&run, Method::Mcts),
        Command::Baseline { run, strategy } => run::search(&run, strategy),
        Command::Annotate { run, sample_fraction } => run::annotate(&run, sample_fraction),
        Command::Eval { predictions, out } => run::eval(&predictions, &out),
        Command::RewardStats(run) => run::reward_stats(&run),
        Command::MakeToy { out, seed } => run::make_toy(&out, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
