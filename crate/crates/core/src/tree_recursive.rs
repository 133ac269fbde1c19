//! Recursive tree builder. Serves as the reference for the iterative builder
//! and as a runtime option.

use crate::integrator::{leapfrog, PhasePoint};
use crate::model::TargetModel;
use crate::rng::RngKey;
use crate::tree::{merge, subtree_id, Flags, NoProbe, Probe, Summary, Tree, TreeContext};
use crate::treemath::LeafIndex;

pub fn build_tree_recursive<M: TargetModel + ?Sized>(
    ctx: &TreeContext<'_, M>,
    z: &PhasePoint,
    depth: u32,
    eps: f64,
    key: &RngKey,
) -> Tree {
    build_tree_recursive_probed(ctx, z, depth, eps, key, &mut NoProbe)
}

pub fn build_tree_recursive_probed<M: TargetModel + ?Sized, P: Probe>(
    ctx: &TreeContext<'_, M>,
    z: &PhasePoint,
    depth: u32,
    eps: f64,
    key: &RngKey,
    probe: &mut P,
) -> Tree {
    assert!(depth < 32, "tree depth {depth} too large");
    build(ctx, z, depth, eps, key, 0, probe)
}

fn build<M: TargetModel + ?Sized, P: Probe>(
    ctx: &TreeContext<'_, M>,
    z: &PhasePoint,
    depth: u32,
    eps: f64,
    key: &RngKey,
    offset: LeafIndex,
    probe: &mut P,
) -> Tree {
    if depth == 0 {
        let next = leapfrog(z, eps, ctx.mass, ctx.model);
        let (summary, flags, energy) = ctx.leaf(&next);
        probe.leaf(offset, energy);
        return Tree::from_parts(next.clone(), next, summary, flags);
    }
    let half = 1u64 << (depth - 1);
    let left = build(ctx, z, depth - 1, eps, key, offset, probe);
    if !left.is_valid() {
        return left;
    }
    let right = build(ctx, &left.right, depth - 1, eps, key, offset + half, probe);

    let (l_end, l_summary, _) = split_tree(left);
    let (r_end, r_summary, r_flags) = split_tree(right);
    let (summary, flags) = merge(
        ctx,
        l_summary,
        r_summary,
        r_flags,
        &l_end.0,
        &r_end.1,
        eps,
        key,
        subtree_id(offset, depth),
    );
    Tree::from_parts(l_end.0, r_end.1, summary, flags)
}

fn split_tree(t: Tree) -> ((PhasePoint, PhasePoint), Summary, Flags) {
    let flags = Flags {
        turning: t.turning,
        diverging: t.diverging,
    };
    let summary = Summary {
        proposal: t.proposal,
        log_weight: t.log_weight,
        momentum_sum: t.momentum_sum,
        accept_sum: t.accept_sum,
        leapfrog_count: t.leapfrog_count,
    };
    ((t.left, t.right), summary, flags)
}
