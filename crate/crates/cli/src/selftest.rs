use std::process::ExitCode;

use turnstile_core::integrator::{hamiltonian, kinetic_energy, leapfrog};
use turnstile_core::model::{
    fd_gradient, funnel_model, gaussian_model, logistic_regression_model, std_normal_model,
    LogisticRegressionData,
};
use turnstile_core::oracle::compare_trees;
use turnstile_core::tree_iterative::storage_trace;
use turnstile_core::treemath::{bit_count, candidate_set, subtree_leftmost, trailing_ones};
use turnstile_core::{Criterion, MassMatrix, PhasePoint, RngKey, TargetModel, TreeContext};

type Check = (&'static str, fn() -> bool);

fn bit_examples() -> bool {
    bit_count(6) == 2
        && bit_count(0) == 0
        && bit_count(11) == 3
        && trailing_ones(11) == 2
        && trailing_ones(6) == 0
        && trailing_ones(7) == 3
        && subtree_leftmost(6, 1) == 6
        && subtree_leftmost(11, 2) == 8
}

fn candidate_sets() -> bool {
    let leaves = |n| candidate_set(n).iter().map(|c| (c.leaf, c.slot)).collect::<Vec<_>>();
    leaves(11) == [(10, 2), (8, 1)]
        && leaves(6).is_empty()
        && leaves(7) == [(6, 2), (4, 1), (0, 0)]
        && (0..1u64 << 14).all(|n| {
            let brute: Vec<u64> = (1..=trailing_ones(n)).map(|k| subtree_leftmost(n, k)).collect();
            candidate_set(n).iter().map(|c| c.leaf).eq(brute)
        })
}

fn model_examples() -> bool {
    let one = LogisticRegressionData::new(vec![vec![0.0]], vec![1.0], 1).unwrap();
    let logistic = logistic_regression_model(one);
    (std_normal_model(3).unwrap().potential(&[1.0, -1.0, 2.0]) - 3.0).abs() < 1e-15
        && (gaussian_model(vec![100.0, 0.01]).unwrap().potential(&[10.0, 0.1]) - 1.0).abs() < 1e-12
        && (logistic.potential(&[0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-12
}

fn gradients() -> bool {
    let data = LogisticRegressionData::synthetic(50, 3, RngKey::from_seed(1));
    let models = [
        std_normal_model(4).unwrap(),
        gaussian_model(vec![4.0, 0.5, 2.0]).unwrap(),
        logistic_regression_model(data),
        funnel_model(5).unwrap(),
    ];
    let mut rng_key = RngKey::from_seed(2);
    models.iter().all(|m| {
        (0..20).all(|i| {
            rng_key = rng_key.fold_in(i);
            let q: Vec<f64> = (0..m.dim()).map(|j| 2.0 * rng_key.uniform_at(j as u64) - 1.0).collect();
            let mut g = vec![0.0; m.dim()];
            m.gradient(&q, &mut g);
            let fd = fd_gradient(m, &q, 1e-5);
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            norm(&diff) / (1.0 + norm(&g)) <= 1e-5
        })
    })
}

fn integrator_examples() -> bool {
    let model = std_normal_model(1).unwrap();
    let mass = MassMatrix::identity(1);
    let z = PhasePoint::new(&model, vec![1.0], vec![0.0]);
    let z1 = leapfrog(&z, 0.1, &mass, &model);
    let m2 = MassMatrix::from_inv_diag(vec![0.5, 2.0]).unwrap();
    (z1.position[0] - 0.995).abs() < 1e-15
        && (z1.momentum[0] + 0.09975).abs() < 1e-15
        && kinetic_energy(&[1.0, 2.0], &m2) == 4.25
        && hamiltonian(&PhasePoint::new(&model, vec![1.0], vec![1.0]), &mass) == 1.0
}

fn storage_bounds() -> bool {
    let model = std_normal_model(2).unwrap();
    let mass = MassMatrix::identity(2);
    let z = PhasePoint::new(&model, vec![0.3, -0.2], vec![0.5, 0.8]);
    let ctx = TreeContext {
        model: &model,
        mass: &mass,
        criterion: Criterion::Generalized,
        initial_energy: hamiltonian(&z, &mass),
        divergence_threshold: 1000.0,
    };
    (0..=12).all(|d| {
        let (tree, trace) = storage_trace(&ctx, &z, d, 1e-4, &RngKey::from_seed(0));
        trace.high_water <= d as usize && trace.schedule_ok && tree.leapfrog_count == 1 << d
    })
}

fn oracle() -> bool {
    compare_trees(8, 40, 99).iter().all(|t| t.all_passed())
}

const CHECKS: &[Check] = &[
    ("bit arithmetic examples", bit_examples),
    ("candidate sets", candidate_sets),
    ("model potentials", model_examples),
    ("gradients vs finite differences", gradients),
    ("leapfrog and energy", integrator_examples),
    ("storage bound and schedule", storage_bounds),
    ("iterative matches recursive", oracle),
];

pub fn run() -> anyhow::Result<ExitCode> {
    let mut failed = 0;
    for (name, check) in CHECKS {
        let ok = check();
        failed += usize::from(!ok);
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of {} checks passed", CHECKS.len() - failed, CHECKS.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
