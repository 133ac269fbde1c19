//! Outer NUTS transition and a fixed-length HMC baseline.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{hamiltonian, leapfrog, MassMatrix, PhasePoint};
use crate::model::TargetModel;
use crate::rng::RngKey;
use crate::tree::{check_uturn, log_add_exp, Criterion, Tree, TreeContext};
use crate::tree_iterative::build_tree_iterative;
use crate::tree_recursive::build_tree_recursive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeBuilder {
    Recursive,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub step_size: f64,
    pub mass: MassMatrix,
    pub max_tree_depth: u32,
    pub criterion: Criterion,
    pub divergence_threshold: f64,
    pub tree_builder: TreeBuilder,
}

impl SamplerConfig {
    pub fn new(dim: usize) -> Self {
        SamplerConfig {
            step_size: 0.1,
            mass: MassMatrix::identity(dim),
            max_tree_depth: 10,
            criterion: Criterion::Generalized,
            divergence_threshold: 1000.0,
            tree_builder: TreeBuilder::Iterative,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(1..=30).contains(&self.max_tree_depth) {
            return Err(Error::InvalidConfig(format!(
                "max tree depth must be in 1..=30, got {}",
                self.max_tree_depth
            )));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::InvalidConfig("divergence threshold must be positive".into()));
        }
        if self.mass.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.mass.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats {
    /// Number of doublings attempted, including the one that stopped the
    /// trajectory.
    pub depth_reached: u32,
    pub leapfrog_calls: u64,
    pub diverged: bool,
    /// Mean of `min(1, exp(H0 - H))` over every leaf generated.
    pub accept_stat: f64,
    /// Hamiltonian of the returned point with its momentum.
    pub energy: f64,
}

/// Position with its cached potential and gradient, carried between
/// transitions so that each gradient evaluation is one leapfrog step.
pub fn initial_point<M: TargetModel + ?Sized>(model: &M, position: Vec<f64>) -> PhasePoint {
    let dim = position.len();
    PhasePoint::new(model, position, vec![0.0; dim])
}

pub(crate) fn refresh_momentum(z: &PhasePoint, mass: &MassMatrix, key: &RngKey) -> PhasePoint {
    let mut rng = key.stream();
    let momentum = mass
        .inv_diag()
        .iter()
        .map(|m| rng.sample::<f64, _>(StandardNormal) / m.sqrt())
        .collect();
    PhasePoint {
        momentum,
        ..z.clone()
    }
}

fn build<M: TargetModel + ?Sized>(
    builder: TreeBuilder,
    ctx: &TreeContext<'_, M>,
    z: &PhasePoint,
    depth: u32,
    eps: f64,
    key: &RngKey,
) -> Tree {
    match builder {
        TreeBuilder::Recursive => build_tree_recursive(ctx, z, depth, eps, key),
        TreeBuilder::Iterative => build_tree_iterative(ctx, z, depth, eps, key),
    }
}

/// One NUTS transition from `z` (its momentum is ignored and resampled).
pub fn nuts_transition<M: TargetModel + ?Sized>(
    z: &PhasePoint,
    config: &SamplerConfig,
    model: &M,
    key: &RngKey,
) -> (PhasePoint, TransitionStats) {
    let (momentum_key, tree_key) = key.split();
    let start = refresh_momentum(z, &config.mass, &momentum_key);
    let h0 = hamiltonian(&start, &config.mass);
    let ctx = TreeContext {
        model,
        mass: &config.mass,
        criterion: config.criterion,
        initial_energy: h0,
        divergence_threshold: config.divergence_threshold,
    };

    let mut minus = start.clone();
    let mut plus = start.clone();
    let mut momentum_sum = start.momentum.clone();
    let mut proposal = start;
    let mut log_weight = 0.0;
    let mut leapfrogs = 0u64;
    let mut accept_sum = 0.0;
    let mut diverged = false;
    let mut depth_reached = 0;

    for depth in 0..config.max_tree_depth {
        let (draw_key, build_key) = tree_key.fold_in(u64::from(depth)).split();
        let forward = draw_key.uniform_at(0) < 0.5;
        let (from, eps) = if forward {
            (&plus, config.step_size)
        } else {
            (&minus, -config.step_size)
        };
        let tree = build(config.tree_builder, &ctx, from, depth, eps, &build_key);
        depth_reached = depth + 1;
        leapfrogs += tree.leapfrog_count;
        accept_sum += tree.accept_sum;
        if tree.diverging {
            diverged = true;
            break;
        }
        if tree.turning {
            break;
        }

        // Biased progressive sampling: favour the new subtree.
        if draw_key.uniform_at(1) < (tree.log_weight - log_weight).exp() {
            proposal = tree.proposal;
        }
        log_weight = log_add_exp(log_weight, tree.log_weight);
        for (a, b) in momentum_sum.iter_mut().zip(&tree.momentum_sum) {
            *a += b;
        }
        if forward {
            plus = tree.right;
        } else {
            minus = tree.right;
        }
        if check_uturn(&minus, &plus, &config.mass, config.criterion, Some(&momentum_sum)) {
            break;
        }
    }

    let stats = TransitionStats {
        depth_reached,
        leapfrog_calls: leapfrogs,
        diverged,
        accept_stat: if leapfrogs > 0 {
            accept_sum / leapfrogs as f64
        } else {
            0.0
        },
        energy: hamiltonian(&proposal, &config.mass),
    };
    (proposal, stats)
}

/// Fixed-length HMC with a Metropolis correction.
pub fn hmc_transition<M: TargetModel + ?Sized>(
    z: &PhasePoint,
    config: &SamplerConfig,
    model: &M,
    key: &RngKey,
    num_steps: u32,
) -> (PhasePoint, TransitionStats) {
    assert!(num_steps >= 1, "HMC needs at least one leapfrog step");
    let (momentum_key, accept_key) = key.split();
    let start = refresh_momentum(z, &config.mass, &momentum_key);
    let h0 = hamiltonian(&start, &config.mass);
    let mut current = start.clone();
    for _ in 0..num_steps {
        current = leapfrog(&current, config.step_size, &config.mass, model);
    }
    let h1 = hamiltonian(&current, &config.mass);
    let delta = h1 - h0;
    let diverged = crate::integrator::is_divergent(delta, config.divergence_threshold);
    let accept_prob = if delta.is_finite() {
        (-delta).exp().min(1.0)
    } else {
        0.0
    };
    let accepted = accept_key.uniform_at(0) < accept_prob;
    let next = if accepted { current } else { start };
    let stats = TransitionStats {
        depth_reached: 0,
        leapfrog_calls: u64::from(num_steps),
        diverged,
        accept_stat: accept_prob,
        energy: hamiltonian(&next, &config.mass),
    };
    (next, stats)
}
