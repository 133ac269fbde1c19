//! Splittable counter-based random keys.
//!
//! An [`RngKey`] is 128 bits of state that is never mutated. Child keys are
//! derived deterministically with [`RngKey::split`] and [`RngKey::fold_in`];
//! random values come from a ChaCha8 keystream addressed by word position,
//! so a draw depends only on the key and its index, never on how many draws
//! other code made before it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STREAM_SPLIT: u64 = 0;
const STREAM_FOLD: u64 = 1;
const STREAM_UNIFORM: u64 = 2;
const STREAM_SEQUENTIAL: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngKey([u64; 2]);

impl RngKey {
    pub fn from_seed(seed: u64) -> Self {
        // Spread the seed so that nearby seeds start from unrelated keys.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RngKey([rng.next_u64(), rng.next_u64()])
    }

    pub fn raw(&self) -> [u64; 2] {
        self.0
    }

    fn cipher(&self, stream: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.0[0].to_le_bytes());
        seed[8..16].copy_from_slice(&self.0[1].to_le_bytes());
        // Domain tag for the upper half of the cipher key.
        seed[16..24].copy_from_slice(b"turnstil");
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng
    }

    pub fn split(&self) -> (RngKey, RngKey) {
        let mut rng = self.cipher(STREAM_SPLIT);
        let a = RngKey([rng.next_u64(), rng.next_u64()]);
        let b = RngKey([rng.next_u64(), rng.next_u64()]);
        (a, b)
    }

    /// Child key indexed by `data`. Distinct indices give distinct keys.
    pub fn fold_in(&self, data: u64) -> RngKey {
        let mut rng = self.cipher(STREAM_FOLD);
        rng.set_word_pos(u128::from(data) * 4);
        RngKey([rng.next_u64(), rng.next_u64()])
    }

    /// Uniform draw in `[0, 1)` at position `index` of this key's stream.
    pub fn uniform_at(&self, index: u64) -> f64 {
        let mut rng = self.cipher(STREAM_UNIFORM);
        rng.set_word_pos(u128::from(index) * 2);
        unit_f64(rng.next_u64())
    }

    /// A sequential generator owned by this key, for bulk draws such as
    /// momentum refreshes.
    pub fn stream(&self) -> ChaCha8Rng {
        self.cipher(STREAM_SEQUENTIAL)
    }
}

#[inline]
fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn split_is_deterministic() {
        let k = RngKey::from_seed(42);
        assert_eq!(k.split(), k.split());
    }

    #[test]
    fn children_differ_from_parent_and_each_other() {
        let k = RngKey::from_seed(7);
        let (a, b) = k.split();
        assert_ne!(a, b);
        assert_ne!(a, k);
        assert_ne!(b, k);
    }

    #[test]
    fn million_derived_keys_are_unique() {
        let mut seen = HashSet::with_capacity(1_000_000);
        let mut frontier = vec![RngKey::from_seed(0)];
        seen.insert(frontier[0]);
        while seen.len() < 1_000_000 {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for k in &frontier {
                let (a, b) = k.split();
                for c in [a, b] {
                    assert!(seen.insert(c), "duplicate key");
                    next.push(c);
                    if seen.len() >= 1_000_000 {
                        break;
                    }
                }
                if seen.len() >= 1_000_000 {
                    break;
                }
            }
            frontier = next;
        }
    }

    #[test]
    fn fold_in_indices_are_distinct() {
        let k = RngKey::from_seed(3);
        let keys: HashSet<_> = (0..10_000).map(|i| k.fold_in(i)).collect();
        assert_eq!(keys.len(), 10_000);
        assert_ne!(k.fold_in(0), k.split().0);
    }

    #[test]
    fn uniform_draws_look_uniform_and_independent() {
        let (a, b) = RngKey::from_seed(11).split();
        let n = 100_000u64;
        let xa: Vec<f64> = (0..n).map(|i| a.uniform_at(i)).collect();
        let xb: Vec<f64> = (0..n).map(|i| b.uniform_at(i)).collect();
        let mean = xa.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean={mean}");
        let var = xa.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 1.0 / 12.0).abs() < 0.002);
        // Sibling streams should be uncorrelated: |corr| ~ 1/sqrt(n).
        let mb = xb.iter().sum::<f64>() / n as f64;
        let cov = xa
            .iter()
            .zip(&xb)
            .map(|(x, y)| (x - mean) * (y - mb))
            .sum::<f64>()
            / n as f64;
        let corr = cov / (1.0 / 12.0);
        assert!(corr.abs() < 0.015, "corr={corr}");
        // Lag-1 autocorrelation within one stream.
        let lag = xa
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        assert!((lag / var).abs() < 0.015);
        assert!(xa.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn uniform_at_is_addressable() {
        let k = RngKey::from_seed(5);
        let forward: Vec<f64> = (0..16).map(|i| k.uniform_at(i)).collect();
        let backward: Vec<f64> = (0..16).rev().map(|i| k.uniform_at(i)).collect();
        let mut b = backward.clone();
        b.reverse();
        assert_eq!(forward, b);
    }
}
