//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs under `cargo test` as a plain binary so its report is always shown.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use turnstile_core::chains::{run, ChainResult, RunConfig};
use turnstile_core::diagnostics::{ess, ks_normal, split_rhat};
use turnstile_core::integrator::{hamiltonian, leapfrog, MassMatrix, PhasePoint};
use turnstile_core::model::{
    fd_gradient, funnel_model, gaussian_model, logistic_regression_model, std_normal_model,
    LogisticRegressionData,
};
use turnstile_core::tree_iterative::storage_trace;
use turnstile_core::treemath::{candidate_set, subtree_leftmost, trailing_ones};
use turnstile_core::{BuiltinModel, Criterion, RngKey, TargetModel, TreeContext};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn turnstile(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_turnstile"))
        .args(args)
        .output()
        .expect("turnstile binary runs")
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let out = turnstile(&["compare-trees", "--depth-max", "10", "--trials", "500", "--seed", "2024"]);
    let elapsed = started.elapsed();
    let text = String::from_utf8_lossy(&out.stdout);
    let full_rows = text.lines().filter(|l| l.contains("500/500")).count();
    outcome(
        out.status.success() && full_rows == 11 && elapsed < Duration::from_secs(60),
        format!("{full_rows}/11 depths at 500/500, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn tree_ctx<'a>(model: &'a BuiltinModel, mass: &'a MassMatrix, z: &PhasePoint, criterion: Criterion) -> TreeContext<'a, BuiltinModel> {
    TreeContext {
        model,
        mass,
        criterion,
        initial_energy: hamiltonian(z, mass),
        divergence_threshold: 1000.0,
    }
}

fn memory_bound() -> Outcome {
    // A very wide Gaussian with a small step never turns within 4096 steps.
    let model = gaussian_model(vec![1e6; 4]).unwrap();
    let mass = MassMatrix::identity(4);
    let z = PhasePoint::new(&model, vec![0.2, -0.1, 0.4, 0.0], vec![1.0, -0.5, 0.2, 0.7]);
    let mut worst = String::new();
    let mut pass = true;
    for criterion in [Criterion::Classic, Criterion::Generalized] {
        let ctx = tree_ctx(&model, &mass, &z, criterion);
        for depth in 0..=12u32 {
            let (tree, trace) = storage_trace(&ctx, &z, depth, 1e-3, &RngKey::from_seed(depth.into()));
            let ok = !tree.turning
                && !tree.diverging
                && trace.high_water <= depth as usize
                && trace.leapfrog_calls == 1 << depth
                && tree.leapfrog_count == 1 << depth;
            if !ok {
                pass = false;
                worst = format!("depth {depth}: high water {}, {} steps", trace.high_water, trace.leapfrog_calls);
            }
        }
    }
    outcome(pass, if pass { "high water <= d and 2^d steps for d = 0..12".into() } else { worst })
}

fn candidate_sets() -> Outcome {
    let eleven: Vec<u64> = candidate_set(11).iter().map(|c| c.leaf).collect();
    let mismatches = (0..1u64 << 16)
        .filter(|&n| {
            let brute: Vec<u64> = (1..=trailing_ones(n)).map(|k| subtree_leftmost(n, k)).collect();
            !candidate_set(n).iter().map(|c| c.leaf).eq(brute)
        })
        .count();
    outcome(
        eleven == [10, 8] && mismatches == 0,
        format!("C(11) = {eleven:?}, {mismatches} mismatches below 2^16"),
    )
}

fn check_schedule() -> Outcome {
    let model = gaussian_model(vec![1e6; 2]).unwrap();
    let mass = MassMatrix::identity(2);
    let z = PhasePoint::new(&model, vec![0.3, 0.1], vec![0.5, -1.0]);
    let ctx = tree_ctx(&model, &mass, &z, Criterion::Generalized);
    let (_, trace) = storage_trace(&ctx, &z, 4, 1e-3, &RngKey::from_seed(0));
    let slots = trace.checks_at(11);
    let leaves: Vec<u64> = candidate_set(11)
        .iter()
        .filter(|c| slots.contains(&c.slot))
        .map(|c| c.leaf)
        .collect();
    outcome(
        slots == [2, 1] && leaves == [10, 8] && trace.schedule_ok,
        format!("step 11 read slots {slots:?} holding leaves {leaves:?}"),
    )
}

fn chains_of(results: &[ChainResult]) -> Vec<Vec<Vec<f64>>> {
    results.iter().map(|r| r.samples.clone()).collect()
}

fn sampling_correctness() -> Outcome {
    let started = Instant::now();
    let model = std_normal_model(10).unwrap();
    let config = RunConfig {
        num_chains: 4,
        num_warmup: 1000,
        num_samples: 1000,
        seed: 1,
        ..RunConfig::new(10)
    };
    let results = run(&config, &model).unwrap();
    let chains = chains_of(&results);
    let ess_v = ess(&chains).unwrap();
    let rhat = split_rhat(&chains).unwrap();
    let (mut max_mean, mut var_lo, mut var_hi, mut min_p) = (0.0f64, f64::INFINITY, 0.0f64, 1.0f64);
    for d in 0..10 {
        let col: Vec<f64> = chains.iter().flatten().map(|r| r[d]).collect();
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        max_mean = max_mean.max(mean.abs());
        var_lo = var_lo.min(var);
        var_hi = var_hi.max(var);
        min_p = min_p.min(ks_normal(&col, 0.0, 1.0).unwrap().1);
    }
    let max_rhat = rhat.iter().copied().fold(0.0, f64::max);
    let min_ess = ess_v.iter().copied().fold(f64::INFINITY, f64::min);
    let elapsed = started.elapsed();
    outcome(
        max_mean < 0.05
            && var_lo >= 0.9
            && var_hi <= 1.1
            && max_rhat < 1.01
            && min_ess > 400.0
            && min_p > 0.001
            && elapsed < Duration::from_secs(120),
        format!(
            "max |mean| {max_mean:.4}, var [{var_lo:.3}, {var_hi:.3}], max rhat {max_rhat:.4}, \
             min ess {min_ess:.0}, min KS p {min_p:.3}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn adaptation() -> Outcome {
    let truth = [100.0, 0.01];
    let model = gaussian_model(truth.to_vec()).unwrap();
    let config = RunConfig {
        num_chains: 4,
        num_warmup: 1000,
        num_samples: 1000,
        seed: 1,
        ..RunConfig::new(2)
    };
    let results = run(&config, &model).unwrap();
    let worst_ratio = results
        .iter()
        .flat_map(|r| r.inv_mass.iter().zip(&truth).map(|(m, t)| (m / t).max(t / m)))
        .fold(1.0, f64::max);
    let draws: usize = results.iter().map(|r| r.stats.len()).sum();
    let accept = results
        .iter()
        .flat_map(|r| r.stats.iter().map(|s| s.accept_stat))
        .sum::<f64>()
        / draws as f64;
    outcome(
        worst_ratio <= 2.0 && (0.7..=0.9).contains(&accept),
        format!("worst inverse-mass ratio {worst_ratio:.3}, mean accept {accept:.4}"),
    )
}

fn integrator_order() -> Outcome {
    let model = std_normal_model(1).unwrap();
    let mass = MassMatrix::identity(1);
    let key = RngKey::from_seed(17);
    // Mean one-step energy error over a fixed set of phase points.
    let error = |eps: f64| -> f64 {
        (0..1000u64)
            .map(|i| {
                let q = 4.0 * key.uniform_at(2 * i) - 2.0;
                let p = 4.0 * key.uniform_at(2 * i + 1) - 2.0;
                let z = PhasePoint::new(&model, vec![q], vec![p]);
                (hamiltonian(&leapfrog(&z, eps, &mass, &model), &mass) - hamiltonian(&z, &mass)).abs()
            })
            .sum::<f64>()
            / 1000.0
    };
    let (e1, e2, e3) = (error(0.2), error(0.1), error(0.05));
    let (r1, r2) = (e1 / e2, e2 / e3);
    outcome(
        (6.0..=10.0).contains(&r1) && (6.0..=10.0).contains(&r2),
        format!("error ratios {r1:.3} (0.2 -> 0.1), {r2:.3} (0.1 -> 0.05)"),
    )
}

fn gradient_oracle() -> Outcome {
    let models = [
        std_normal_model(6).unwrap(),
        gaussian_model(vec![100.0, 0.01, 3.0]).unwrap(),
        logistic_regression_model(LogisticRegressionData::synthetic(100, 3, RngKey::from_seed(4))),
        funnel_model(10).unwrap(),
    ];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for (m, model) in models.iter().enumerate() {
        let key = RngKey::from_seed(100 + m as u64);
        for point in 0..100u64 {
            let q: Vec<f64> = (0..model.dim() as u64)
                .map(|j| 4.0 * key.fold_in(point).uniform_at(j) - 2.0)
                .collect();
            let mut g = vec![0.0; q.len()];
            model.gradient(&q, &mut g);
            let fd = fd_gradient(model, &q, 1e-5);
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&diff) / (1.0 + norm(&g)));
        }
    }
    outcome(worst <= 1e-5, format!("worst relative error {worst:.2e} over 4 models x 100 points"))
}

fn mode_invariance() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let models = [
        r#"{"model": "std_normal", "params": {"dim": 3}}"#,
        r#"{"model": "gaussian", "params": {"cov_diag": [4.0, 0.25]}}"#,
        r#"{"model": "logistic", "params": {"num_points": 30, "num_features": 2}}"#,
        r#"{"model": "funnel", "params": {"dim": 3}}"#,
    ];
    let mut identical = 0;
    let mut total = 0;
    for (i, model) in models.iter().enumerate() {
        for ext in ["csv", "json"] {
            let files: Vec<Vec<u8>> = ["seq", "par"]
                .iter()
                .map(|mode| {
                    let path = dir.path().join(format!("{i}_{mode}.{ext}"));
                    let out = turnstile(&[
                        "sample", "--model", model, "--chains", "4", "--warmup", "150", "--samples", "150",
                        "--seed", "11", "--mode", mode, "--omit-timing", "--out", path.to_str().unwrap(),
                    ]);
                    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
                    std::fs::read(&path).unwrap()
                })
                .collect();
            total += 1;
            identical += usize::from(files[0] == files[1] && !files[0].is_empty());
        }
    }
    outcome(identical == total, format!("{identical}/{total} output files byte-identical"))
}

fn declared_benchmarks() -> Outcome {
    let out = turnstile(&[
        "bench", "--model", "std_normal", "--chains", "1", "--warmup", "200", "--samples", "200",
        "--depth", "8", "--reps", "20",
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text
        .lines()
        .find(|l| l.starts_with("ns/leapfrog (sampling)"))
        .unwrap_or("")
        .split_whitespace()
        .skip(2)
        .collect::<Vec<_>>()
        .join(" / ");
    outcome(
        out.status.success(),
        format!("not reproducible at desk scale; bench ran, ns/leapfrog rec / iter = {line}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 O(d) memory", memory_bound),
        ("3 candidate sets", candidate_sets),
        ("4 U-turn check schedule", check_schedule),
        ("5 sampling correctness", sampling_correctness),
        ("6 adaptation", adaptation),
        ("7 integrator order", integrator_order),
        ("8 gradient oracle", gradient_oracle),
        ("9 mode invariance", mode_invariance),
        ("10 desk-scale timings (declared)", declared_benchmarks),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let result = check();
        failures += usize::from(!result.pass);
        let tag = match (result.pass, name.starts_with("10 ")) {
            (true, true) => "DECLARED",
            (true, false) => "PASS",
            (false, _) => "FAIL",
        };
        println!("[{tag}] {name}: {}", result.detail);
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
