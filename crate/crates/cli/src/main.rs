use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod bench;
mod compare;
mod sample;
mod selftest;

use turnstile_core::chains::ChainMode;
use turnstile_core::sampler::TreeBuilder;
use turnstile_core::{BuiltinModel, Criterion, ModelDescriptor};

#[derive(Parser)]
#[command(name = "turnstile", version, about = "No-U-Turn sampling with an iterative tree builder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Seq,
    Par,
}

impl From<ModeArg> for ChainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Seq => ChainMode::Sequential,
            ModeArg::Par => ChainMode::Parallel,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BuilderArg {
    Rec,
    Iter,
}

impl From<BuilderArg> for TreeBuilder {
    fn from(b: BuilderArg) -> Self {
        match b {
            BuilderArg::Rec => TreeBuilder::Recursive,
            BuilderArg::Iter => TreeBuilder::Iterative,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Classic,
    Generalized,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Classic => Criterion::Classic,
            CriterionArg::Generalized => Criterion::Generalized,
        }
    }
}

/// Settings shared by `sample` and `bench`.
#[derive(clap::Args, Clone)]
pub struct RunArgs {
    /// Model descriptor: inline JSON, a path to a JSON file, or a built-in
    /// model name (std_normal, gaussian, logistic, funnel).
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "generalized")]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = 10)]
    pub max_depth: u32,
    /// Step size for runs without warmup. Warmup searches from 1.0 instead.
    #[arg(long, default_value_t = 0.1)]
    pub step_size: f64,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples and write them with a diagnostic summary.
    Sample {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "seq")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "iter")]
        builder: BuilderArg,
        /// Output file ending in .json or .csv. Without it a summary is
        /// printed to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave wall-clock fields out of JSON output.
        #[arg(long)]
        omit_timing: bool,
    },
    /// Compare the iterative and recursive builders on random problems.
    CompareTrees {
        #[arg(long, default_value_t = 10)]
        depth_max: u32,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time per leapfrog step and per effective sample for both builders.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Depth of the standalone tree-building timing.
        #[arg(long, default_value_t = 8)]
        depth: u32,
        /// Repetitions of the standalone tree build.
        #[arg(long, default_value_t = 50)]
        reps: usize,
    },
    /// Run the built-in analytic checks and property suites.
    Selftest,
}

pub fn load_model(arg: &str) -> anyhow::Result<(String, BuiltinModel)> {
    let trimmed = arg.trim();
    let desc = if trimmed.starts_with('{') {
        ModelDescriptor::from_json(trimmed)?
    } else if std::path::Path::new(trimmed).is_file() {
        ModelDescriptor::from_path(std::path::Path::new(trimmed))?
    } else {
        ModelDescriptor {
            model: trimmed.to_string(),
            params: Default::default(),
            data_path: None,
        }
    };
    let model = desc.build()?;
    Ok((desc.model, model))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample {
            run,
            mode,
            builder,
            out,
            omit_timing,
        } => sample::run(&run, mode.into(), builder.into(), out.as_deref(), omit_timing),
        Command::CompareTrees {
            depth_max,
            trials,
            seed,
        } => compare::run(depth_max, trials, seed),
        Command::Bench { run, depth, reps } => bench::run(&run, depth, reps),
        Command::Selftest => selftest::run(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
