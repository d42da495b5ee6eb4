use super::PointBlock;
use crate::error::{Error, Result};

/// Checks the `(t, k, d)`-net property of a block of `2^k` points: every
/// elementary dyadic box of volume `2^{t-k}` holds exactly `2^t` points.
///
/// All splittings of the resolution `k - t` across the `d` axes are checked.
pub fn verify_net_balance(block: &PointBlock, k: u32, t: u32) -> Result<bool> {
    let n = block.len();
    if !n.is_power_of_two() || n != 1usize << k {
        return Err(Error::config(format!(
            "net check needs 2^{k} points, block has {n}"
        )));
    }
    if k <= t {
        return Err(Error::config(format!("net check needs k > t, got k={k}, t={t}")));
    }
    let resolution = k - t;
    let d = block.dimension();
    let mut split = vec![0u32; d];
    let mut counts = vec![0u32; 1usize << resolution];
    Ok(check_splits(block, &mut split, 0, resolution, 1 << t, &mut counts))
}

fn check_splits(
    block: &PointBlock,
    split: &mut [u32],
    axis: usize,
    remaining: u32,
    expected: u32,
    counts: &mut [u32],
) -> bool {
    if axis + 1 == split.len() {
        split[axis] = remaining;
        return box_counts_equal(block, split, expected, counts);
    }
    (0..=remaining).all(|bits| {
        split[axis] = bits;
        check_splits(block, split, axis + 1, remaining - bits, expected, counts)
    })
}

fn box_counts_equal(block: &PointBlock, split: &[u32], expected: u32, counts: &mut [u32]) -> bool {
    counts.fill(0);
    for p in block.points() {
        let mut cell = 0usize;
        for (&u, &bits) in p.iter().zip(split) {
            cell = (cell << bits) | (u * (1u64 << bits) as f64) as usize;
        }
        counts[cell] += 1;
    }
    counts.iter().all(|&c| c == expected)
}
