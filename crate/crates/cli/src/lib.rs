//! Command-line driver for the concept-learning benchmark pipeline.
//!
//! Artifacts under the output directory:
//!
//! ```text
//! enumerate/concepts_class{k}.jsonl   every expression of class k
//! dedup/concepts_class{k}.jsonl       same, with final status
//! dedup/dedup_audit.jsonl             one line per discarded concept
//! prompts/sample.json                 sampled concepts per class
//! prompts/prompts_{id}.jsonl          prompts for one concept
//! evaluate/{learner}/records.jsonl    one scored record per prompt
//! stats/results.csv                   per-concept accuracy
//! stats/class_means.csv               per-class mean accuracy
//! stats/summary.json                  r, p, slope, intercept per learner
//! stats/table.txt                     correlation table
//! ```
//!
//! Every JSONL file starts with a `{"meta": ...}` line carrying the resolved
//! configuration; CSV files carry the same header in a leading `# meta:`
//! comment line, and `summary.json` under its `meta` key.

pub mod config;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use conceptbench_core::dedup::DedupMode;
use conceptbench_core::stats::AbstainPolicy;

pub use config::{ClassRange, ConfigError, LearnerKind, Overrides, Preset, RunConfig};
pub use pipeline::{Pipeline, StageReport};

#[derive(Debug, Parser)]
#[command(name = "conceptbench", version, about = "Enumerate concepts, build prompts, evaluate learners and summarize accuracy by complexity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory holding all artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// TOML config file (a JSON artifact header also works).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Size preset: desk (6 concepts x 100 prompts) or full (18 x 1000).
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Stride of integer constants in classes 3 and up.
    #[arg(long, global = true)]
    pub stride: Option<u8>,

    /// summed or per-vector.
    #[arg(long, global = true)]
    pub dedup_mode: Option<DedupMode>,

    /// Class range such as 1..5.
    #[arg(long, global = true)]
    pub classes: Option<ClassRange>,

    #[arg(long, global = true)]
    pub concepts_per_class: Option<usize>,

    #[arg(long, global = true)]
    pub prompts_per_concept: Option<usize>,

    #[arg(long, global = true, value_enum)]
    pub learner: Option<LearnerKind>,

    /// TOML file describing the chat endpoint for the remote learner.
    #[arg(long, global = true)]
    pub endpoint_config: Option<PathBuf>,

    /// Concurrent requests for the remote learner.
    #[arg(long, global = true)]
    pub max_in_flight: Option<usize>,

    /// incorrect or excluded.
    #[arg(long, global = true)]
    pub abstain_policy: Option<AbstainPolicy>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Enumerate every expression of each class.
    Enumerate,
    /// Remove duplicate, near-duplicate and ineligible concepts.
    Dedup,
    /// Sample concepts and write their prompts.
    Prompts,
    /// Run the selected learner on every prompt.
    Evaluate,
    /// Aggregate accuracies and correlations.
    Stats,
    /// Run every stage in order.
    All,
    /// Print the resolved configuration as TOML.
    Config,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.preset,
            config_file: self.config.clone(),
            seed: self.seed,
            stride: self.stride,
            dedup_mode: self.dedup_mode,
            classes: self.classes,
            concepts_per_class: self.concepts_per_class,
            prompts_per_concept: self.prompts_per_concept,
            learner: self.learner,
            endpoint_config: self.endpoint_config.clone(),
            max_in_flight: self.max_in_flight,
            abstain_policy: self.abstain_policy,
        }
    }
}

/// What a command produced.
#[derive(Debug)]
pub enum Outcome {
    Stages(Vec<StageReport>),
    Config(String),
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::resolve(&cli.overrides())?;
    let pipeline = Pipeline::new(cfg, &cli.out_dir);
    let reports = match cli.command {
        Command::Config => return Ok(Outcome::Config(pipeline.config().to_toml())),
        Command::Enumerate => vec![pipeline.enumerate()?],
        Command::Dedup => vec![pipeline.dedup()?],
        Command::Prompts => vec![pipeline.prompts()?],
        Command::Evaluate => vec![pipeline.evaluate()?],
        Command::Stats => vec![pipeline.stats()?],
        Command::All => pipeline.run_all()?,
    };
    Ok(Outcome::Stages(reports))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I) -> anyhow::Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| ConfigError(e.to_string()))?;
    run(&cli)
}
