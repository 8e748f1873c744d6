//! Counter-based random streams keyed by a seed and a hierarchical path.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible stream identified by `(seed, path)`.
///
/// Children are derived by appending an index to the path, so work split across
/// threads draws from the same numbers no matter how it is scheduled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    path: Vec<u64>,
    key: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, path: Vec::new(), key: splitmix(seed) }
    }

    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        let key = splitmix(self.key ^ splitmix(index.wrapping_add(GOLDEN.rotate_left(17))));
        RngStream { seed: self.seed, path, key }
    }

    /// Child keyed by a short label, for separating logically distinct streams.
    pub fn named(&self, label: &str) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        self.child(h)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        let mut z = self.key;
        for chunk in bytes.chunks_mut(8) {
            z = splitmix(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }
}

/// Fisher-Yates shuffle driven by `rng`.
pub fn shuffle<T, R: Rng + ?Sized>(v: &mut [T], rng: &mut R) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Uniform choice of `k` distinct indices from `0..n`, returned in random order.
pub fn sample_indices<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k.min(n));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_path_same_numbers() {
        let a = RngStream::new(7).child(3).child(1);
        let b = RngStream::new(7).child(3).child(1);
        let xa: u64 = a.rng().random();
        let xb: u64 = b.rng().random();
        assert_eq!(xa, xb);
    }

    #[test]
    fn sibling_paths_differ() {
        let root = RngStream::new(7);
        let x: u64 = root.child(0).rng().random();
        let y: u64 = root.child(1).rng().random();
        let z: u64 = root.child(0).child(0).rng().random();
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut v: Vec<u32> = (0..100).collect();
        shuffle(&mut v, &mut RngStream::new(1).rng());
        let mut s = v.clone();
        s.sort();
        assert_eq!(s, (0..100).collect::<Vec<_>>());
        assert_ne!(v, s);
    }
}
