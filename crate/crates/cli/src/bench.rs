use std::process::ExitCode;
use std::time::Instant;

use turnstile_core::chains::{run as run_chains, ChainMode};
use turnstile_core::diagnostics::summarize;
use turnstile_core::integrator::hamiltonian;
use turnstile_core::sampler::{initial_point, TreeBuilder};
use turnstile_core::tree_iterative::build_tree_iterative;
use turnstile_core::tree_recursive::build_tree_recursive;
use turnstile_core::{MassMatrix, PhasePoint, RngKey, TargetModel, TreeContext};

use crate::sample::run_config;
use crate::{load_model, RunArgs};

struct Row {
    ns_per_leapfrog: f64,
    ns_per_ess: f64,
    tree_ns_per_leapfrog: f64,
}

fn tree_timing<M: TargetModel + ?Sized>(
    model: &M,
    builder: TreeBuilder,
    args: &RunArgs,
    depth: u32,
    reps: usize,
) -> f64 {
    let dim = model.dim();
    let mass = MassMatrix::identity(dim);
    let mut z: PhasePoint = initial_point(model, vec![0.1; dim]);
    z.momentum = (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect();
    let ctx = TreeContext {
        model,
        mass: &mass,
        criterion: args.criterion.into(),
        initial_energy: hamiltonian(&z, &mass),
        divergence_threshold: 1000.0,
    };
    let key = RngKey::from_seed(args.seed);
    let mut leapfrogs = 0u64;
    let started = Instant::now();
    for _ in 0..reps {
        let tree = match builder {
            TreeBuilder::Recursive => build_tree_recursive(&ctx, &z, depth, args.step_size, &key),
            TreeBuilder::Iterative => build_tree_iterative(&ctx, &z, depth, args.step_size, &key),
        };
        leapfrogs += tree.leapfrog_count;
        std::hint::black_box(&tree);
    }
    started.elapsed().as_nanos() as f64 / leapfrogs.max(1) as f64
}

pub fn run(args: &RunArgs, depth: u32, reps: usize) -> anyhow::Result<ExitCode> {
    let (name, model) = load_model(&args.model)?;
    let mut rows = Vec::new();
    for builder in [TreeBuilder::Recursive, TreeBuilder::Iterative] {
        let config = run_config(args, model.dim(), ChainMode::Sequential, builder);
        let results = run_chains(&config, &model)?;
        let summary = summarize(&results)?;
        rows.push(Row {
            ns_per_leapfrog: summary.ns_per_leapfrog.unwrap_or(f64::NAN),
            ns_per_ess: summary.ns_per_effective_sample.unwrap_or(f64::NAN),
            tree_ns_per_leapfrog: tree_timing(&model, builder, args, depth, reps),
        });
    }
    println!("model {name}, dim {}, {} chains x {} draws", model.dim(), args.chains, args.samples);
    println!(
        "{:<22} {:>14} {:>14}",
        "metric", "recursive", "iterative"
    );
    let line = |label: &str, f: fn(&Row) -> f64| {
        println!("{label:<22} {:>14.1} {:>14.1}", f(&rows[0]), f(&rows[1]));
    };
    line("ns/leapfrog (sampling)", |r| r.ns_per_leapfrog);
    line("ns/effective sample", |r| r.ns_per_ess);
    line(&format!("ns/leapfrog (depth {depth})"), |r| r.tree_ns_per_leapfrog);
    Ok(ExitCode::SUCCESS)
}
