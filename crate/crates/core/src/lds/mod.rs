//! Scrambled base-2 digital sequences.
//!
//! [`generate_block`] returns points `start..start+m` of a Sobol'
//! `(t, d)`-sequence, optionally randomized with Owen's nested uniform
//! scrambling. Index 0 (the origin before scrambling) is part of the
//! sequence. For the common case of a full `2^k` block starting at 0,
//! [`BlockGenerator`] reuses the unscrambled digits across randomizations and
//! scrambles each coordinate with a single hash per point.

mod direction;
mod net;
mod normal;
mod scramble;

pub use direction::{DigitalSequenceSpec, DIGITS};
pub use net::verify_net_balance;
pub use normal::{inverse_normal_cdf, normal_cdf, normal_pdf};
pub use scramble::{derive_key, mix64, owen_scramble, ScrambleKey};

pub(crate) use normal::ppnd16;

use crate::error::{Error, Result};

/// `2^-32`, the resolution of a 32-digit coordinate.
pub const RESOLUTION: f64 = 1.0 / 4_294_967_296.0;

/// Converts a 32-digit coordinate to a point of `[0, 1)`.
#[inline]
pub fn to_unit(x: u32) -> f64 {
    f64::from(x) * RESOLUTION
}

/// `Φ^{-1}(u)` with `u` clamped to `[2^-32, 1 - 2^-32]`, so a scrambled
/// coordinate that lands exactly on 0 still maps to a finite normal.
#[inline]
pub fn gaussian_from_unit(u: f64) -> f64 {
    ppnd16(u.clamp(RESOLUTION, 1.0 - RESOLUTION))
}

/// Same as [`gaussian_from_unit`] for a raw 32-digit coordinate.
#[inline]
pub fn gaussian_from_digits(x: u32) -> f64 {
    ppnd16(to_unit(x.max(1)))
}

/// `m` points of `[0,1)^d`, stored row-major in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBlock {
    dimension: usize,
    coords: Vec<f64>,
}

impl PointBlock {
    pub fn new(dimension: usize, coords: Vec<f64>) -> Result<Self> {
        if dimension == 0 || !coords.len().is_multiple_of(dimension) {
            return Err(Error::config(format!(
                "{} coordinates do not form points of dimension {dimension}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !(0.0..1.0).contains(*c)) {
            return Err(Error::domain("coordinate", *bad, "0 <= u < 1"));
        }
        Ok(Self { dimension, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dimension)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Points `start..start+m` of the sequence, scrambled when `key` is given.
pub fn generate_block(
    spec: &DigitalSequenceSpec,
    start: u64,
    m: usize,
    key: Option<ScrambleKey>,
) -> Result<PointBlock> {
    if m == 0 {
        return Err(Error::config("a point block needs at least one point"));
    }
    let end = start
        .checked_add(m as u64)
        .filter(|&e| e <= 1u64 << 32)
        .ok_or(Error::SequenceOverflow {
            start,
            count: m as u64,
        })?;
    let d = spec.dimension();
    let mut raw = vec![0u32; m * d];
    if start == 0 && m.is_power_of_two() {
        BlockGenerator::new(spec, m)?.fill(key, &mut raw);
    } else {
        let keys: Option<Vec<u64>> = key.map(|k| (0..d).map(|j| k.dimension_key(j)).collect());
        for (row, index) in raw.chunks_exact_mut(d).zip(start..end) {
            for (j, x) in row.iter_mut().enumerate() {
                let c = spec.coordinate(index as u32, j);
                *x = match &keys {
                    Some(keys) => owen_scramble(c, keys[j]),
                    None => c,
                };
            }
        }
    }
    Ok(PointBlock {
        dimension: d,
        coords: raw.into_iter().map(to_unit).collect(),
    })
}

/// Produces the first `2^k` points of a sequence, repeatedly, under
/// different scrambles.
#[derive(Debug, Clone)]
pub struct BlockGenerator {
    log2_m: u32,
    dimension: usize,
    // per dimension: leading k digits of the unscrambled coordinate of each point
    digits: Vec<Vec<u32>>,
    table: Vec<u32>,
}

impl BlockGenerator {
    pub fn new(spec: &DigitalSequenceSpec, m: usize) -> Result<Self> {
        if !m.is_power_of_two() || m > 1 << 31 {
            return Err(Error::config(format!(
                "block size {m} must be a power of two no larger than 2^31"
            )));
        }
        let log2_m = m.trailing_zeros();
        let digits = (0..spec.dimension())
            .map(|j| {
                let v = spec.direction_numbers(j);
                let mut x = vec![0u32; m];
                for n in 1..m {
                    x[n] = x[n & (n - 1)] ^ v[n.trailing_zeros() as usize];
                }
                if log2_m > 0 {
                    for c in &mut x {
                        *c >>= DIGITS as u32 - log2_m;
                    }
                }
                x
            })
            .collect();
        Ok(Self {
            log2_m,
            dimension: spec.dimension(),
            digits,
            table: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        1 << self.log2_m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Writes the block as raw 32-digit coordinates, row-major.
    pub fn fill(&mut self, key: Option<ScrambleKey>, out: &mut [u32]) {
        for j in 0..self.dimension {
            self.fill_dimension(key, j, out, self.dimension);
        }
    }

    /// Writes coordinate `j` of every point into `out[n * stride + j]`.
    pub fn fill_dimension(
        &mut self,
        key: Option<ScrambleKey>,
        j: usize,
        out: &mut [u32],
        stride: usize,
    ) {
        let shift = DIGITS as u32 - self.log2_m;
        let digits = &self.digits[j];
        match key {
            Some(key) => {
                scramble::scramble_table(self.log2_m, key.dimension_key(j), &mut self.table);
                for (n, &c) in digits.iter().enumerate() {
                    out[n * stride + j] = self.table[c as usize];
                }
            }
            None => {
                for (n, &c) in digits.iter().enumerate() {
                    out[n * stride + j] = if shift >= 32 { 0 } else { c << shift };
                }
            }
        }
    }
}
