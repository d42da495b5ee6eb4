//! Owen nested uniform scrambling in base 2.
//!
//! Every node of the binary digit tree (depth `j`, input prefix
//! `d_1..d_{j-1}`) owns an independent random flip bit for digit `j`. The
//! bits come from a counter-based hash of `(seed, replicate, dimension, node)`
//! so any point of any replicate can be scrambled in isolation.
//!
//! A node is named by its prefix with trailing zeros stripped, `q`, plus the
//! number of stripped zeros `z`. All nodes sharing `q` read consecutive bits
//! of one 64-bit hash of `q`, which lets a coordinate be scrambled with one
//! hash per set digit instead of one per digit.

use super::direction::DIGITS;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a sequence of words into one well-mixed 64-bit key.
#[inline]
pub fn derive_key(words: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for &w in words {
        h = mix64(h ^ mix64(w.wrapping_add(GOLDEN)));
    }
    h
}

/// Identifies one randomization of the sequence.
///
/// The digit permutations of dimension `j` are a deterministic function of
/// `(seed, replicate, j)`; the dimension index is supplied when a coordinate
/// is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScrambleKey {
    pub seed: u64,
    pub replicate: u64,
}

impl ScrambleKey {
    pub fn new(seed: u64, replicate: u64) -> Self {
        Self { seed, replicate }
    }

    /// Hash key driving the digit tree of one dimension.
    #[inline]
    pub fn dimension_key(&self, dimension: usize) -> u64 {
        derive_key(&[self.seed, self.replicate, dimension as u64])
    }
}

/// Flip bits for the subtree below prefix `q` (of `q_len` digits), top-aligned:
/// bit 31 flips the digit right after the prefix, bit 30 the next, and so on.
#[inline]
fn node_bits(key: u64, q_len: u32, q: u32) -> u32 {
    let node = (u64::from(q_len) << 32) | u64::from(q);
    (mix64(key ^ mix64(node.wrapping_add(GOLDEN))) >> 32) as u32
}

/// Digits `from+1 ..= to` (1-based, from the most significant bit).
#[inline]
fn digit_range(from: u32, to: u32) -> u32 {
    let upper = if from == 0 { u32::MAX } else { u32::MAX >> from };
    let lower = if to as usize >= DIGITS { 0 } else { u32::MAX >> to };
    upper & !lower
}

/// Applies the nested scramble selected by `key` to one 32-digit coordinate.
#[inline]
pub fn owen_scramble(x: u32, key: u64) -> u32 {
    let mut mask = 0u32;
    let mut q_len = 0u32;
    loop {
        let q = if q_len == 0 { 0 } else { x >> (32 - q_len) };
        let rest = if q_len == 0 { x } else { x << q_len };
        let end = if rest == 0 {
            DIGITS as u32
        } else {
            q_len + rest.leading_zeros() + 1
        };
        mask |= (node_bits(key, q_len, q) >> q_len) & digit_range(q_len, end);
        if end as usize == DIGITS {
            return x ^ mask;
        }
        q_len = end;
    }
}

/// Scrambled images of every coordinate whose digits beyond `k` are zero:
/// entry `i` is `owen_scramble(i << (32 - k), key)`.
///
/// Costs one hash per entry, which is what makes scrambling a full
/// `2^k`-point block cheap.
pub fn scramble_table(k: u32, key: u64, out: &mut Vec<u32>) {
    debug_assert!(k <= 31);
    let size = 1usize << k;
    out.clear();
    out.reserve(size);
    out.push(node_bits(key, 0, 0));
    for i in 1..size {
        // the last set digit of i (k digits, top-aligned) is digit `e`
        let e = k - (i as u32).trailing_zeros();
        let parent = out[i & (i - 1)];
        let q = (i >> (k - e)) as u32;
        let tail = (node_bits(key, e, q) >> e) & digit_range(e, DIGITS as u32);
        out.push((parent & digit_range(0, e)) | tail);
    }
    if k > 0 {
        let shift = DIGITS as u32 - k;
        for (i, m) in out.iter_mut().enumerate() {
            *m ^= (i as u32) << shift;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Digit-by-digit reference: one independent flip per tree node.
    fn reference_scramble(x: u32, key: u64) -> u32 {
        let mut out = 0u32;
        for j in 1..=32u32 {
            let prefix_len = j - 1;
            let prefix = if prefix_len == 0 { 0 } else { x >> (32 - prefix_len) };
            let (q_len, q) = if prefix == 0 {
                (0, 0)
            } else {
                let tz = prefix.trailing_zeros();
                (prefix_len - tz, prefix >> tz)
            };
            let z = prefix_len - q_len;
            let flip = (node_bits(key, q_len, q) >> (31 - z)) & 1;
            let digit = (x >> (32 - j)) & 1;
            out |= (digit ^ flip) << (32 - j);
        }
        out
    }

    #[test]
    fn segment_walk_matches_digitwise_definition() {
        let key = ScrambleKey::new(7, 3).dimension_key(2);
        let mut state = 12345u64;
        for _ in 0..2000 {
            state = mix64(state);
            let x = (state >> 17) as u32;
            assert_eq!(owen_scramble(x, key), reference_scramble(x, key));
        }
        for x in [0, 1, u32::MAX, 1 << 31, 0x8000_0001] {
            assert_eq!(owen_scramble(x, key), reference_scramble(x, key));
        }
    }

    #[test]
    fn table_matches_pointwise_scramble() {
        let key = ScrambleKey::new(1, 99).dimension_key(0);
        let mut table = Vec::new();
        for k in [0u32, 1, 2, 5, 10] {
            scramble_table(k, key, &mut table);
            for (i, &v) in table.iter().enumerate() {
                assert_eq!(v, owen_scramble((i as u32).checked_shl(32 - k).unwrap_or(0), key));
            }
        }
    }

    #[test]
    fn scrambling_is_a_bijection_on_prefixes() {
        let key = ScrambleKey::new(5, 0).dimension_key(0);
        let mut table = Vec::new();
        scramble_table(8, key, &mut table);
        let mut tops: Vec<u32> = table.iter().map(|v| v >> 24).collect();
        tops.sort_unstable();
        assert_eq!(tops, (0..256).collect::<Vec<_>>());
    }

    #[test]
    fn keys_separate_seed_replicate_and_dimension() {
        let a = ScrambleKey::new(1, 2).dimension_key(3);
        assert_ne!(a, ScrambleKey::new(2, 2).dimension_key(3));
        assert_ne!(a, ScrambleKey::new(1, 3).dimension_key(3));
        assert_ne!(a, ScrambleKey::new(1, 2).dimension_key(4));
        assert_eq!(a, ScrambleKey::new(1, 2).dimension_key(3));
    }
}
