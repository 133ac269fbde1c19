use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use turnstile_core::chains::{run as run_chains, ChainMode, RunConfig};
use turnstile_core::report::{write_samples_csv, OutputFormat, RunReport};
use turnstile_core::sampler::{SamplerConfig, TreeBuilder};
use turnstile_core::TargetModel;

use crate::{load_model, RunArgs};

pub fn run_config(args: &RunArgs, dim: usize, mode: ChainMode, builder: TreeBuilder) -> RunConfig {
    RunConfig {
        num_chains: args.chains,
        num_warmup: args.warmup,
        num_samples: args.samples,
        mode,
        seed: args.seed,
        sampler: SamplerConfig {
            step_size: args.step_size,
            max_tree_depth: args.max_depth,
            criterion: args.criterion.into(),
            tree_builder: builder,
            ..SamplerConfig::new(dim)
        },
        target_accept: args.target_accept,
        ..RunConfig::new(dim)
    }
}

pub fn run(
    args: &RunArgs,
    mode: ChainMode,
    builder: TreeBuilder,
    out: Option<&Path>,
    omit_timing: bool,
) -> anyhow::Result<ExitCode> {
    let format = out.map(OutputFormat::from_path).transpose()?;
    let (name, model) = load_model(&args.model)?;
    let config = run_config(args, model.dim(), mode, builder);
    let results = run_chains(&config, &model)?;
    let report = RunReport::new(&name, args.seed, args.warmup, &results, !omit_timing)?;

    match (out, format) {
        (Some(path), Some(OutputFormat::Json)) => {
            std::fs::write(path, report.to_json()? + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
        }
        (Some(path), Some(OutputFormat::Csv)) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_samples_csv(BufWriter::new(file), &results)?;
        }
        _ => {}
    }

    let s = &report.summary;
    println!("model {name}, {} chains x {} draws", results.len(), args.samples);
    println!("{:>5} {:>10} {:>10} {:>10} {:>8}", "dim", "mean", "std", "ess", "rhat");
    for (d, v) in s.dims.iter().enumerate() {
        println!("{d:>5} {:>10.4} {:>10.4} {:>10.1} {:>8.4}", v.mean, v.std, v.ess, v.split_rhat);
    }
    println!(
        "leapfrogs {} (sampling {}), divergences {}, mean accept {:.3}",
        s.total_leapfrogs, s.sampling_leapfrogs, s.divergences, s.mean_accept
    );
    Ok(ExitCode::SUCCESS)
}
