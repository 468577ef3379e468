//! `trustsim`: batch front end for corpus generation, fitting, simulation,
//! fidelity evaluation and policy training.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input or configuration,
//! 3 runtime failure. Errors go to stderr as one JSON object.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "trustsim", version, about = "Trust-aware user simulation for proactive dialog agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known ground truth.
    GenCorpus(Flags),
    /// Fit a behavior table, trait distributions and a trust classifier.
    Fit(Flags),
    /// Replay a corpus's conditions (or sample new users) through the simulator.
    Simulate(Flags),
    /// Score a simulated log against its reference corpus.
    Evaluate(Flags),
    /// Compare complexity-based and task-step-based simulation on a held-out split.
    Compare(Flags),
    /// Train the reference tabular policy in the trust-aware environment.
    TrainRl(Flags),
}

/// Flags shared by all subcommands; each uses the ones it needs.
#[derive(Debug, Clone, Default, Args)]
struct Flags {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Simulated log to evaluate.
    #[arg(long)]
    simulated: Option<PathBuf>,
    /// Previously fitted behavior table.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// complexity | task-step
    #[arg(long)]
    mode: Option<String>,
    /// csv | jsonl
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fallback_threshold: Option<usize>,
    #[arg(long)]
    dialogs: Option<usize>,
    /// Simulate this many freshly sampled users instead of replaying the corpus.
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Greedy evaluation episodes logged after training.
    #[arg(long)]
    rollouts: Option<usize>,
    #[arg(long)]
    score_weight: Option<f64>,
    #[arg(long)]
    trust_weight: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

impl Flags {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            corpus: self.corpus,
            simulated: self.simulated,
            table: self.table,
            out: self.out,
            mode: self.mode,
            format: self.format,
            seed: self.seed,
            fallback_threshold: self.fallback_threshold,
            dialogs: self.dialogs,
            users: self.users,
            episodes: self.episodes,
            rollouts: self.rollouts,
            score_weight: self.score_weight,
            trust_weight: self.trust_weight,
            train_fraction: self.train_fraction,
            ..Default::default()
        };
        Ok(file.overlay(flags))
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(trustsim::Error),
}

impl From<trustsim::Error> for CliError {
    fn from(e: trustsim::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) => 3,
        }
    }

    fn report(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage(m) => ("Usage", m.clone()),
            CliError::Core(e) => (e.kind(), e.to_string()),
        };
        serde_json::json!({ "error": kind, "message": message }).to_string()
    }
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    match cli.command {
        Command::GenCorpus(f) => commands::gen_corpus(f.resolve()?),
        Command::Fit(f) => commands::fit(f.resolve()?),
        Command::Simulate(f) => commands::simulate(f.resolve()?),
        Command::Evaluate(f) => commands::evaluate(f.resolve()?),
        Command::Compare(f) => commands::compare(f.resolve()?),
        Command::TrainRl(f) => commands::train_rl(f.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
