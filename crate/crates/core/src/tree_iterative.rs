//! Iterative tree builder with `depth` storage slots.
//!
//! Leaves are generated one leapfrog step at a time. An even leaf `n` is
//! written to slot `bit_count(n)`; an odd leaf closes every subtree whose
//! rightmost leaf it is, and is checked against the leftmost leaf of each of
//! those subtrees, smallest first. The leftmost leaves are exactly
//! [`candidate_set`]`(n)` and each one is still present in its slot, because it
//! is the latest even leaf with that bit count.
//!
//! Each slot also carries the running [`Summary`] of the completed subtree
//! that starts at its leaf, so proposals and momentum sums are combined in
//! the same order as the recursive builder.

use crate::integrator::{leapfrog, PhasePoint};
use crate::model::TargetModel;
use crate::rng::RngKey;
use crate::tree::{absorb_invalid, merge, subtree_id, Flags, NoProbe, Probe, Summary, Tree, TreeContext};
use crate::treemath::{bit_count, candidate_set, subtree_leftmost, trailing_ones, LeafIndex};

#[derive(Debug, Clone)]
struct Slot {
    leaf: LeafIndex,
    phase: PhasePoint,
    /// Summary of the largest completed subtree whose leftmost leaf is
    /// `leaf`. Taken when that subtree is merged into its parent.
    summary: Option<Summary>,
}

/// The `depth`-slot array of stored even leaves.
#[derive(Debug, Clone)]
pub struct NodeStore {
    slots: Vec<Option<Slot>>,
}

impl NodeStore {
    pub fn new(depth: u32) -> Self {
        NodeStore {
            slots: vec![None; depth as usize],
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Leaf index held in `slot`, if any.
    pub fn leaf_at(&self, slot: usize) -> Option<LeafIndex> {
        self.slots.get(slot)?.as_ref().map(|s| s.leaf)
    }

    fn put(&mut self, slot: usize, record: Slot) {
        self.slots[slot] = Some(record);
    }

    fn get(&self, slot: usize, leaf: LeafIndex) -> &Slot {
        let s = self.slots[slot]
            .as_ref()
            .unwrap_or_else(|| panic!("slot {slot} empty, expected leaf {leaf}"));
        assert_eq!(s.leaf, leaf, "slot {slot} holds leaf {} instead of {leaf}", s.leaf);
        s
    }

    fn take_summary(&mut self, slot: usize, leaf: LeafIndex) -> Summary {
        self.get(slot, leaf);
        self.slots[slot]
            .as_mut()
            .and_then(|s| s.summary.take())
            .unwrap_or_else(|| panic!("subtree at leaf {leaf} already merged"))
    }
}

pub fn build_tree_iterative<M: TargetModel + ?Sized>(
    ctx: &TreeContext<'_, M>,
    z: &PhasePoint,
    depth: u32,
    eps: f64,
    key: &RngKey,
) -> Tree {
    build_tree_iterative_probed(ctx, z, depth, eps, key, &mut NoProbe)
}

pub fn build_tree_iterative_probed<M: TargetModel + ?Sized, P: Probe>(
    ctx: &TreeContext<'_, M>,
    z: &PhasePoint,
    depth: u32,
    eps: f64,
    key: &RngKey,
    probe: &mut P,
) -> Tree {
    assert!(depth < 32, "tree depth {depth} too large");
    let last_leaf: LeafIndex = (1u64 << depth) - 1;
    let mut store = NodeStore::new(depth);
    let mut prev: Option<PhasePoint> = None;

    for n in 0..=last_leaf {
        let z_n = leapfrog(prev.as_ref().unwrap_or(z), eps, ctx.mass, ctx.model);
        let (mut current, mut flags, energy) = ctx.leaf(&z_n);
        probe.leaf(n, energy);
        if flags.diverging {
            return finish(store, z_n, n, 0, current, flags, depth);
        }

        // Close every subtree whose rightmost leaf is n, smallest first.
        let closed = trailing_ones(n);
        for level in 1..=closed {
            let leaf = subtree_leftmost(n, level);
            let slot = bit_count(leaf) as usize;
            let stored = store.leaf_at(slot).expect("candidate slot occupied");
            probe.check(n, slot, stored);
            let left = store.take_summary(slot, leaf);
            let left_end = &store.get(slot, leaf).phase;
            let id = subtree_id(leaf, level);
            (current, flags) = merge(ctx, left, current, flags, left_end, &z_n, eps, key, id);
            if flags.turning {
                return finish(store, z_n, n, level, current, flags, depth);
            }
        }

        if n == last_leaf {
            let left = match store.slots.first() {
                Some(Some(slot)) => slot.phase.clone(),
                _ => z_n.clone(),
            };
            return Tree::from_parts(left, z_n, current, flags);
        }

        // Park the completed subtree at its leftmost leaf's slot. For even n
        // that is the new leaf itself.
        let leftmost = subtree_leftmost(n, closed);
        let slot = bit_count(leftmost) as usize;
        if n % 2 == 0 {
            store.put(
                slot,
                Slot {
                    leaf: n,
                    phase: z_n.clone(),
                    summary: Some(current),
                },
            );
            probe.store(n, slot, store.occupied());
        } else {
            let record = store.slots[slot].as_mut().expect("leftmost leaf stored");
            debug_assert_eq!(record.leaf, leftmost);
            record.summary = Some(current);
        }
        prev = Some(z_n);
    }
    unreachable!("loop returns at the last leaf")
}

/// One entry of a [`StorageTrace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StorageEvent {
    /// Even leaf `step` was written to `slot`.
    Write { step: LeafIndex, slot: usize },
    /// Odd leaf `step` was checked against these slots, in order.
    Check { step: LeafIndex, slots: Vec<usize> },
}

/// Chronological record of slot writes and U-turn check reads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StorageTrace {
    pub events: Vec<StorageEvent>,
    /// Largest number of simultaneously occupied slots.
    pub high_water: usize,
    pub leapfrog_calls: u64,
    /// Every check read the leaf predicted by `candidate_set`.
    pub schedule_ok: bool,
}

impl StorageTrace {
    pub fn new() -> Self {
        StorageTrace {
            schedule_ok: true,
            ..Default::default()
        }
    }

    /// Slots checked at step `n`, empty if no check happened there.
    pub fn checks_at(&self, n: LeafIndex) -> Vec<usize> {
        self.events
            .iter()
            .find_map(|e| match e {
                StorageEvent::Check { step, slots } if *step == n => Some(slots.clone()),
                _ => None,
            })
            .unwrap_or_default()
    }
}

impl Probe for StorageTrace {
    fn leaf(&mut self, _index: LeafIndex, _energy: f64) {
        self.leapfrog_calls += 1;
    }

    fn store(&mut self, step: LeafIndex, slot: usize, occupied: usize) {
        self.high_water = self.high_water.max(occupied);
        self.events.push(StorageEvent::Write { step, slot });
    }

    fn check(&mut self, step: LeafIndex, slot: usize, stored_leaf: LeafIndex) {
        let expected = candidate_set(step);
        let position = match self.events.last_mut() {
            Some(StorageEvent::Check { step: s, slots }) if *s == step => {
                slots.push(slot);
                slots.len() - 1
            }
            _ => {
                self.events.push(StorageEvent::Check { step, slots: vec![slot] });
                0
            }
        };
        let ok = expected
            .get(position)
            .is_some_and(|c| c.slot == slot && c.leaf == stored_leaf);
        self.schedule_ok &= ok;
    }
}

/// Build a tree iteratively while recording its storage schedule.
pub fn storage_trace<M: TargetModel + ?Sized>(
    ctx: &TreeContext<'_, M>,
    z: &PhasePoint,
    depth: u32,
    eps: f64,
    key: &RngKey,
) -> (Tree, StorageTrace) {
    let mut trace = StorageTrace::new();
    let tree = build_tree_iterative_probed(ctx, z, depth, eps, key, &mut trace);
    (tree, trace)
}

/// Early termination at leaf `n` after the subtree of depth `level` ending
/// at `n` turned or diverged: fold the invalid subtree into every pending
/// left sibling above it, as the recursion does while unwinding.
fn finish(
    mut store: NodeStore,
    z_n: PhasePoint,
    n: LeafIndex,
    level: u32,
    mut current: Summary,
    flags: Flags,
    depth: u32,
) -> Tree {
    debug_assert!(!flags.is_valid());
    for j in (level + 1)..=depth {
        // At level j the subtree holding n is a right child iff bit j-1 is set.
        if (n >> (j - 1)) & 1 == 1 {
            let leftmost = subtree_leftmost(n, j);
            let left = store.take_summary(bit_count(leftmost) as usize, leftmost);
            current = absorb_invalid(left, current);
        }
    }
    let left = if n == 0 {
        z_n.clone()
    } else {
        store.get(0, 0).phase.clone()
    };
    Tree::from_parts(left, z_n, current, flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{hamiltonian, MassMatrix};
    use crate::model::std_normal_model;
    use crate::tree::Criterion;
    use crate::tree_recursive::build_tree_recursive;

    #[derive(Default)]
    struct Counts {
        leaves: u64,
        high_water: usize,
        checks: Vec<(LeafIndex, usize, LeafIndex)>,
    }

    impl Probe for Counts {
        fn leaf(&mut self, _index: LeafIndex, _energy: f64) {
            self.leaves += 1;
        }
        fn store(&mut self, _step: LeafIndex, _slot: usize, occupied: usize) {
            self.high_water = self.high_water.max(occupied);
        }
        fn check(&mut self, step: LeafIndex, slot: usize, stored: LeafIndex) {
            self.checks.push((step, slot, stored));
        }
    }

    fn setup() -> (crate::model::BuiltinModel, MassMatrix, PhasePoint) {
        let model = std_normal_model(2).unwrap();
        let mass = MassMatrix::identity(2);
        let z = PhasePoint::new(&model, vec![0.4, -0.8], vec![0.7, 0.3]);
        (model, mass, z)
    }

    #[test]
    fn depth_zero_single_step_no_storage() {
        let (model, mass, z) = setup();
        let ctx = TreeContext {
            model: &model,
            mass: &mass,
            criterion: Criterion::Generalized,
            initial_energy: hamiltonian(&z, &mass),
            divergence_threshold: 1000.0,
        };
        let mut counts = Counts::default();
        let t = build_tree_iterative_probed(&ctx, &z, 0, 0.1, &RngKey::from_seed(0), &mut counts);
        assert_eq!(t.leapfrog_count, 1);
        assert_eq!(counts.leaves, 1);
        assert_eq!(counts.high_water, 0);
        assert!(t.left.bitwise_eq(&t.right));
        assert!(!t.turning);
    }

    #[test]
    fn leaf_eleven_checks_ten_then_eight() {
        let (model, mass, z) = setup();
        let ctx = TreeContext {
            model: &model,
            mass: &mass,
            criterion: Criterion::Classic,
            initial_energy: hamiltonian(&z, &mass),
            divergence_threshold: 1000.0,
        };
        let mut counts = Counts::default();
        let t = build_tree_iterative_probed(&ctx, &z, 4, 0.001, &RngKey::from_seed(0), &mut counts);
        assert!(!t.turning);
        let at_11: Vec<_> = counts.checks.iter().filter(|c| c.0 == 11).map(|c| (c.1, c.2)).collect();
        assert_eq!(at_11, vec![(2, 10), (1, 8)]);
        assert!(counts.high_water <= 4);
    }

    #[test]
    fn matches_recursive_on_a_turning_tree() {
        let (model, mass, z) = setup();
        for criterion in [Criterion::Classic, Criterion::Generalized] {
            let ctx = TreeContext {
                model: &model,
                mass: &mass,
                criterion,
                initial_energy: hamiltonian(&z, &mass),
                divergence_threshold: 1000.0,
            };
            for depth in 0..=10 {
                for eps in [0.05, 0.3, 0.9, -0.4] {
                    let key = RngKey::from_seed(depth as u64);
                    let a = build_tree_recursive(&ctx, &z, depth, eps, &key);
                    let b = build_tree_iterative(&ctx, &z, depth, eps, &key);
                    assert!(a.bitwise_eq(&b), "depth {depth} eps {eps} {criterion:?}\n{a:?}\n{b:?}");
                }
            }
        }
    }

    #[test]
    fn storage_trace_small_depths() {
        let (model, mass, z) = setup();
        let ctx = TreeContext {
            model: &model,
            mass: &mass,
            criterion: Criterion::Generalized,
            initial_energy: hamiltonian(&z, &mass),
            divergence_threshold: 1000.0,
        };
        let key = RngKey::from_seed(3);
        let (_, trace) = storage_trace(&ctx, &z, 1, 0.001, &key);
        assert_eq!(
            trace.events,
            vec![
                StorageEvent::Write { step: 0, slot: 0 },
                StorageEvent::Check { step: 1, slots: vec![0] },
            ]
        );
        let (_, trace) = storage_trace(&ctx, &z, 2, 0.001, &key);
        assert_eq!(
            trace.events,
            vec![
                StorageEvent::Write { step: 0, slot: 0 },
                StorageEvent::Check { step: 1, slots: vec![0] },
                StorageEvent::Write { step: 2, slot: 1 },
                StorageEvent::Check { step: 3, slots: vec![1, 0] },
            ]
        );
        assert!(trace.schedule_ok);
        assert_eq!(trace.high_water, 2);
        assert_eq!(trace.leapfrog_calls, 4);
    }
}
