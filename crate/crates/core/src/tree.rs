//! Types and merge rules shared by the recursive and iterative tree builders.
//!
//! Both builders grow a subtrajectory of `2^depth` leapfrog steps from a
//! starting phase point and combine subtrees with the same [`merge`] rule, so
//! the iterative builder reproduces the recursive one bit for bit. The rule:
//!
//! * the merged log weight, momentum sum, accept-stat sum and leapfrog count
//!   are always accumulated, left operand first;
//! * if the right subtree is turning or diverging, the merge inherits its
//!   flags and keeps the left subtree's proposal;
//! * otherwise the U-turn criterion is evaluated across the merged subtree,
//!   and only if it does not fire is one uniform drawn, at the stream
//!   position [`subtree_id`] of the merged subtree, to pick the right
//!   proposal with probability `w_right / (w_left + w_right)`.
//!
//! Leaves are numbered in generation order. With a negative step size the
//! generation order runs backwards in time, so the U-turn criterion is
//! always evaluated on time-ordered endpoints.

use serde::{Deserialize, Serialize};

use crate::integrator::{hamiltonian, is_divergent, MassMatrix, PhasePoint};
use crate::model::TargetModel;
use crate::rng::RngKey;
use crate::treemath::LeafIndex;

/// U-turn termination criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Endpoint displacement dotted with endpoint velocities.
    Classic,
    /// Summed momentum dotted with endpoint velocities.
    Generalized,
}

/// Everything a tree builder needs besides the starting point.
#[derive(Debug, Clone, Copy)]
pub struct TreeContext<'a, M: ?Sized> {
    pub model: &'a M,
    pub mass: &'a MassMatrix,
    pub criterion: Criterion,
    /// Energy of the point the transition started from.
    pub initial_energy: f64,
    pub divergence_threshold: f64,
}

/// Aggregate over the leaves of a (sub)tree, excluding its endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub proposal: PhasePoint,
    /// Log of summed weights `exp(H0 - H)` over non-divergent leaves.
    pub log_weight: f64,
    pub momentum_sum: Vec<f64>,
    /// Sum of `min(1, exp(H0 - H))` over leaves; divergent leaves count as 0.
    pub accept_sum: f64,
    pub leapfrog_count: u64,
}

/// Summary of a subtrajectory built by one call of a tree builder.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// First leaf generated.
    pub left: PhasePoint,
    /// Last leaf generated.
    pub right: PhasePoint,
    pub proposal: PhasePoint,
    pub log_weight: f64,
    pub turning: bool,
    pub diverging: bool,
    pub leapfrog_count: u64,
    pub momentum_sum: Vec<f64>,
    pub accept_sum: f64,
}

impl Tree {
    pub(crate) fn from_parts(left: PhasePoint, right: PhasePoint, s: Summary, flags: Flags) -> Self {
        Tree {
            left,
            right,
            proposal: s.proposal,
            log_weight: s.log_weight,
            turning: flags.turning,
            diverging: flags.diverging,
            leapfrog_count: s.leapfrog_count,
            momentum_sum: s.momentum_sum,
            accept_sum: s.accept_sum,
        }
    }

    pub fn is_valid(&self) -> bool {
        !(self.turning || self.diverging)
    }

    /// Field-by-field bitwise comparison.
    pub fn bitwise_eq(&self, other: &Tree) -> bool {
        self.left.bitwise_eq(&other.left)
            && self.right.bitwise_eq(&other.right)
            && self.proposal.bitwise_eq(&other.proposal)
            && self.log_weight.to_bits() == other.log_weight.to_bits()
            && self.turning == other.turning
            && self.diverging == other.diverging
            && self.leapfrog_count == other.leapfrog_count
            && self.accept_sum.to_bits() == other.accept_sum.to_bits()
            && self.momentum_sum.len() == other.momentum_sum.len()
            && self
                .momentum_sum
                .iter()
                .zip(&other.momentum_sum)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Flags {
    pub turning: bool,
    pub diverging: bool,
}

impl Flags {
    pub fn is_valid(self) -> bool {
        !(self.turning || self.diverging)
    }
}

/// Observation hooks for instrumented builds. All methods default to no-ops.
pub trait Probe {
    /// A leaf was generated by a leapfrog step.
    fn leaf(&mut self, _index: LeafIndex, _energy: f64) {}
    /// The iterative builder wrote leaf `step` into `slot`.
    fn store(&mut self, _step: LeafIndex, _slot: usize, _occupied: usize) {}
    /// The iterative builder checked leaf `step` against the leaf in `slot`.
    fn check(&mut self, _step: LeafIndex, _slot: usize, _stored_leaf: LeafIndex) {}
}

/// Probe that records nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoProbe;

impl Probe for NoProbe {}

/// Stream position of the proposal draw for the merged subtree of the given
/// depth whose leftmost leaf is `leftmost`.
pub fn subtree_id(leftmost: LeafIndex, depth: u32) -> u64 {
    debug_assert!(leftmost < (1 << 32));
    (u64::from(depth) << 32) | leftmost
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

/// U-turn test on time-ordered endpoints `minus` (earlier) and `plus` (later).
///
/// `momentum_sum` is required by [`Criterion::Generalized`] and ignored by
/// [`Criterion::Classic`].
pub fn check_uturn(
    minus: &PhasePoint,
    plus: &PhasePoint,
    mass: &MassMatrix,
    criterion: Criterion,
    momentum_sum: Option<&[f64]>,
) -> bool {
    let dot = |rho: &dyn Fn(usize) -> f64, p: &PhasePoint| -> f64 {
        mass.velocity(&p.momentum)
            .enumerate()
            .map(|(i, v)| rho(i) * v)
            .sum()
    };
    match criterion {
        Criterion::Classic => {
            let dq = |i: usize| plus.position[i] - minus.position[i];
            dot(&dq, minus) < 0.0 || dot(&dq, plus) < 0.0
        }
        Criterion::Generalized => {
            let rho = momentum_sum.expect("generalized criterion needs the momentum sum");
            let r = |i: usize| rho[i];
            dot(&r, minus) < 0.0 || dot(&r, plus) < 0.0
        }
    }
}

impl<'a, M: TargetModel + ?Sized> TreeContext<'a, M> {
    /// Energy bookkeeping for a freshly generated leaf.
    pub(crate) fn leaf(&self, z: &PhasePoint) -> (Summary, Flags, f64) {
        let energy = hamiltonian(z, self.mass);
        let delta = energy - self.initial_energy;
        let diverging = is_divergent(delta, self.divergence_threshold);
        let (log_weight, accept) = if diverging {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (-delta, (-delta).exp().min(1.0))
        };
        let summary = Summary {
            proposal: z.clone(),
            log_weight,
            momentum_sum: z.momentum.clone(),
            accept_sum: accept,
            leapfrog_count: 1,
        };
        let flags = Flags {
            turning: false,
            diverging,
        };
        (summary, flags, energy)
    }

    /// U-turn test on endpoints given in generation order.
    pub(crate) fn is_turning(&self, first: &PhasePoint, last: &PhasePoint, eps: f64, momentum_sum: &[f64]) -> bool {
        let (minus, plus) = if eps >= 0.0 { (first, last) } else { (last, first) };
        check_uturn(minus, plus, self.mass, self.criterion, Some(momentum_sum))
    }
}

/// Combine a valid left subtree with the right subtree that follows it.
///
/// `left_end` and `right_end` are the generation-order endpoints of the
/// merged subtree.
#[allow(clippy::too_many_arguments)]
pub(crate) fn merge<M: TargetModel + ?Sized>(
    ctx: &TreeContext<'_, M>,
    left: Summary,
    right: Summary,
    right_flags: Flags,
    left_end: &PhasePoint,
    right_end: &PhasePoint,
    eps: f64,
    key: &RngKey,
    id: u64,
) -> (Summary, Flags) {
    if !right_flags.is_valid() {
        return (absorb_invalid(left, right), right_flags);
    }
    let (mut merged, right_proposal, right_log_weight) = accumulate(left, right);
    if ctx.is_turning(left_end, right_end, eps, &merged.momentum_sum) {
        let flags = Flags {
            turning: true,
            diverging: false,
        };
        return (merged, flags);
    }
    if key.uniform_at(id) < (right_log_weight - merged.log_weight).exp() {
        merged.proposal = right_proposal;
    }
    (merged, right_flags)
}

/// Merge with a turning or diverging right subtree: totals accumulate and
/// the left proposal is kept.
pub(crate) fn absorb_invalid(left: Summary, right: Summary) -> Summary {
    accumulate(left, right).0
}

/// Totals of `left` followed by `right`, keeping the left proposal. Returns
/// the right proposal and log weight for the caller's selection.
fn accumulate(left: Summary, right: Summary) -> (Summary, PhasePoint, f64) {
    let log_weight = log_add_exp(left.log_weight, right.log_weight);
    let mut momentum_sum = left.momentum_sum;
    for (a, b) in momentum_sum.iter_mut().zip(&right.momentum_sum) {
        *a += b;
    }
    let merged = Summary {
        proposal: left.proposal,
        log_weight,
        momentum_sum,
        accept_sum: left.accept_sum + right.accept_sum,
        leapfrog_count: left.leapfrog_count + right.leapfrog_count,
    };
    (merged, right.proposal, right.log_weight)
}
