//! Bit arithmetic that schedules U-turn checks and storage slots for the
//! iterative tree builder.
//!
//! Leaves of a depth-`d` doubling are numbered `0..2^d` from the start of the
//! subtrajectory. The depth-`k` subtree containing leaf `n` is the set of
//! leaves that agree with `n` on every bit at position `k` and above, so its
//! leftmost leaf is `n` with the low `k` bits cleared. A leaf is the rightmost
//! leaf of a depth-`k` subtree exactly when its low `k` bits are all set.

/// Position of a leaf within one doubling, counted from 0.
pub type LeafIndex = u64;

/// Number of 1-bits in `n`.
#[inline]
pub fn bit_count(n: u64) -> u32 {
    n.count_ones()
}

/// Number of contiguous 1-bits at the least-significant end of `n`.
#[inline]
pub fn trailing_ones(n: u64) -> u32 {
    n.trailing_ones()
}

/// Leftmost leaf of the depth-`k` subtree that contains `n`.
#[inline]
pub fn subtree_leftmost(n: LeafIndex, k: u32) -> LeafIndex {
    if k >= u64::BITS {
        0
    } else {
        n & !((1u64 << k) - 1)
    }
}

/// A stored leaf that leaf `n` must be checked against, together with the
/// storage slot that holds it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub leaf: LeafIndex,
    pub slot: usize,
}

/// Leftmost leaves of every subtree whose rightmost leaf is `n`, smallest
/// subtree first. Empty for even `n`.
pub fn candidate_set(n: LeafIndex) -> Vec<Candidate> {
    (1..=trailing_ones(n))
        .map(|k| {
            let leaf = subtree_leftmost(n, k);
            Candidate {
                leaf,
                slot: bit_count(leaf) as usize,
            }
        })
        .collect()
}

/// Range of storage slots read at odd step `n`, as `(i_max, i_min)`.
///
/// Slots are visited from `i_max` down to `i_min`, which is the same order as
/// [`candidate_set`]. Returns `None` for even `n`.
pub fn check_slot_range(n: LeafIndex) -> Option<(usize, usize)> {
    if n % 2 == 0 {
        return None;
    }
    let i_max = bit_count(n) as usize - 1;
    let i_min = i_max + 1 - trailing_ones(n) as usize;
    Some((i_max, i_min))
}
