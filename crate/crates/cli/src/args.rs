//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tabprompt_core::Task;

use crate::config::PipelineConfig;
use crate::pipeline::{self, EvaluateFiles};
use crate::{CliError, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "tabprompt", version, about = "Synthesize tabular data through context-enriched text encodings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and split the dataset, then produce column descriptors.
    Describe(StageArgs),
    /// Encode training rows as text, one line per row.
    Encode(StageArgs),
    /// Train the generation backend on the encoded corpus.
    Finetune(StageArgs),
    /// Sample synthetic rows until the target count is reached.
    Generate(StageArgs),
    /// Score synthetic rows by machine-learning efficiency on real test rows.
    Evaluate(EvaluateArgs),
    /// Run every stage in order.
    Run(StageArgs),
}

#[derive(Debug, Args)]
pub struct StageArgs {
    /// Pipeline configuration file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Classification,
    Regression,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Classification => Task::Classification,
            TaskArg::Regression => Task::Regression,
        }
    }
}

/// Either `--config` (pipeline artifacts) or `--synthetic/--test/--target` (standalone files).
#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, conflicts_with_all = ["synthetic", "test", "target", "schema", "task"])]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces every seed (configuration mode) or sets both seeds (standalone).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, requires_all = ["test", "target"])]
    pub synthetic: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Schema file written by `describe`.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long)]
    pub cv_seed: Option<u64>,
    #[arg(long)]
    pub forest_seed: Option<u64>,
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
}

fn load_config(path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(PipelineConfig, PathBuf), CliError> {
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.override_seeds(seed);
    }
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| CliError::validation("no output directory: pass --out or set [output] dir"))?;
    Ok((cfg, out))
}

fn stage(args: &StageArgs, f: fn(&PipelineConfig, &Path) -> Result<RunManifest, CliError>) -> Result<String, CliError> {
    let (cfg, out) = load_config(&args.config, args.out.as_deref(), args.seed)?;
    let manifest = f(&cfg, &out)?;
    Ok(format!("{}: {} artifact(s) listed in {}", manifest.status, manifest.artifacts.len(), out.join(pipeline::MANIFEST).display()))
}

fn evaluate(args: &EvaluateArgs) -> Result<String, CliError> {
    if let Some(config) = &args.config {
        let (cfg, out) = load_config(config, args.out.as_deref(), args.seed)?;
        pipeline::cmd_evaluate(&cfg, &out)?;
        return std::fs::read_to_string(out.join(pipeline::REPORT)).map_err(CliError::from);
    }
    let (Some(synthetic), Some(test), Some(target)) = (&args.synthetic, &args.test, &args.target) else {
        return Err(CliError::validation("evaluate needs --config, or --synthetic, --test and --target"));
    };
    let seed_for = |specific: Option<u64>, name: &str| {
        specific
            .or(args.seed)
            .ok_or_else(|| CliError::validation(format!("standalone evaluate needs --seed or --{name}")))
    };
    let files = EvaluateFiles {
        synthetic: synthetic.clone(),
        test: test.clone(),
        target: target.clone(),
        schema: args.schema.clone(),
        task: args.task.map(Task::from),
        cv_seed: seed_for(args.cv_seed, "cv-seed")?,
        forest_seed: seed_for(args.forest_seed, "forest-seed")?,
        cv_folds: args.cv_folds,
    };
    Ok(pipeline::cmd_evaluate_files(&files, args.out.as_deref())?.to_json())
}

/// Executes a parsed command line; returns the process exit code.
pub fn run_cli(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Describe(a) => stage(a, pipeline::cmd_describe),
        Command::Encode(a) => stage(a, pipeline::cmd_encode),
        Command::Finetune(a) => stage(a, pipeline::cmd_finetune),
        Command::Generate(a) => stage(a, pipeline::cmd_generate),
        Command::Run(a) => stage(a, pipeline::cmd_run),
        Command::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(summary) => {
            println!("{}", summary.trim_end());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
