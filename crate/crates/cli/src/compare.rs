use std::process::ExitCode;
use std::time::Instant;

use turnstile_core::oracle::compare_trees;

pub fn run(depth_max: u32, trials: usize, seed: u64) -> anyhow::Result<ExitCode> {
    anyhow::ensure!(depth_max <= 20, "depth-max must be at most 20");
    let started = Instant::now();
    let tallies = compare_trees(depth_max, trials, seed);
    println!("{:>5} {:>12} {:>8} {:>8}", "depth", "agree", "turned", "diverged");
    for t in &tallies {
        println!(
            "{:>5} {:>12} {:>8} {:>8}",
            t.depth,
            format!("{}/{}", t.passed, t.trials),
            t.turned,
            t.diverged
        );
    }
    let ok = tallies.iter().all(|t| t.all_passed());
    println!(
        "{} in {:.2}s",
        if ok { "all trees agree" } else { "MISMATCH" },
        started.elapsed().as_secs_f64()
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
