use std::time::{Duration, Instant};

use super::rates::{estimate_rates, log2_slope, RateEstimates};
use super::stats::{level_statistics, LevelStats, LevelSummary};
use super::sample_range;
use crate::coupling::{CouplingConfig, LevelSampler};
use crate::error::{Error, Result};
use crate::market::{FactorMatrix, Portfolio};

/// Settings of the adaptive MLMC loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlmcOptions {
    /// Draws per level when a run starts; `None` scales them with the
    /// tolerance, see [`MlmcOptions::warmup_draws`].
    pub warmup: Option<u64>,
    /// Levels `0..initial_levels` are sampled before the first bias test.
    pub initial_levels: usize,
    /// Finest level that may be added.
    pub max_levels: usize,
}

impl Default for MlmcOptions {
    fn default() -> Self {
        Self {
            warmup: None,
            initial_levels: 3,
            max_levels: 14,
        }
    }
}

/// Largest automatic warm-up.
pub const MAX_WARMUP: u64 = 10_000;
const MIN_WARMUP: u64 = 100;
const WARMUP_PER_INVERSE_TOLERANCE: f64 = 10.0;

impl MlmcOptions {
    /// Warm-up draws per level at tolerance `epsilon`: the fixed value if
    /// set, otherwise `⌈10/ε⌉` clamped to `[100, 10^4]`.
    pub fn warmup_draws(&self, epsilon: f64) -> u64 {
        self.warmup.unwrap_or_else(|| {
            ((WARMUP_PER_INVERSE_TOLERANCE / epsilon).ceil() as u64).clamp(MIN_WARMUP, MAX_WARMUP)
        })
    }
}

/// Outcome of [`run_mlmc`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlmcReport {
    /// `Σ_ℓ mean(Y_ℓ)`
    pub estimate: f64,
    pub epsilon: f64,
    /// Finest level `L`.
    pub finest_level: usize,
    pub levels: Vec<LevelStats>,
    pub inner_samples: Vec<usize>,
    pub rates: RateEstimates,
    /// Inner evaluations over all levels.
    pub total_cost: u64,
    pub wall_time: Duration,
}

impl MlmcReport {
    /// Derived statistics of the levels with at least 4 draws.
    pub fn summaries(&self) -> Vec<LevelSummary> {
        self.levels
            .iter()
            .filter_map(|s| level_statistics(s).ok())
            .collect()
    }

    /// Standard error of the estimate, `√(Σ S²_ℓ / N_ℓ)`.
    pub fn stderr(&self) -> f64 {
        self.levels
            .iter()
            .filter(|s| s.n > 0)
            .map(|s| s.variance() / s.n as f64)
            .sum::<f64>()
            .sqrt()
    }
}

/// Draws per level minimizing `Σ N_ℓ C_ℓ` subject to
/// `Σ V_ℓ / N_ℓ ≤ ε²/2`: `N_ℓ = ⌈2ε⁻²·√(V_ℓ/C_ℓ)·Σ_j √(V_j C_j)⌉`.
pub fn optimal_allocation(variances: &[f64], costs: &[f64], epsilon: f64) -> Vec<u64> {
    let total: f64 = variances.iter().zip(costs).map(|(v, c)| (v * c).sqrt()).sum();
    variances
        .iter()
        .zip(costs)
        .map(|(v, c)| (2.0 / (epsilon * epsilon) * (v / c).sqrt() * total).ceil() as u64)
        .collect()
}

/// Adaptive multilevel estimate of `P[g(ω) > c]` with root mean square
/// error target `epsilon`.
///
/// Levels `0..initial_levels` start with the warm-up draws. Each round
/// tops every level up to the optimal allocation; once the allocation is
/// met, the remaining bias is estimated as `|mean Y_L| / (2^α̂ - 1)` with
/// `α̂ ≥ 0.5` regressed over levels `ℓ ≥ 1`, and a level is added while it
/// exceeds `ε/√2`. A new level starts from the allocation computed with the
/// variance extrapolated from the finest level.
pub fn run_mlmc(
    p: &Portfolio,
    a: &FactorMatrix,
    config: &CouplingConfig,
    epsilon: f64,
    seed: u64,
    options: &MlmcOptions,
) -> Result<MlmcReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain("epsilon", epsilon, "epsilon > 0"));
    }
    if options.initial_levels < 2 || options.initial_levels > options.max_levels + 1 {
        return Err(Error::config(format!(
            "initial levels {} must lie in 2..={}",
            options.initial_levels,
            options.max_levels + 1
        )));
    }
    let warmup = options.warmup_draws(epsilon);
    if warmup < 4 {
        return Err(Error::config("warm-up needs at least 4 draws per level"));
    }
    let start = Instant::now();
    let sampler = LevelSampler::new(p, a, config)?;
    let mut levels: Vec<LevelStats> = (0..options.initial_levels).map(LevelStats::new).collect();
    let mut inner_samples = (0..options.initial_levels)
        .map(|l| config.schedule.inner_samples(l))
        .collect::<Result<Vec<_>>>()?;
    let mut pending = vec![warmup; options.initial_levels];
    let mut finishing = false;

    let report = |levels: &[LevelStats], inner_samples: &[usize]| {
        let summaries: Vec<LevelSummary> = levels.iter().filter_map(|s| level_statistics(s).ok()).collect();
        MlmcReport {
            estimate: levels.iter().map(LevelStats::mean).sum(),
            epsilon,
            finest_level: levels.len() - 1,
            levels: levels.to_vec(),
            inner_samples: inner_samples.to_vec(),
            rates: estimate_rates(&summaries, inner_samples),
            total_cost: levels.iter().map(|s| s.cost).sum(),
            wall_time: start.elapsed(),
        }
    };

    loop {
        for (l, extra) in pending.iter().enumerate() {
            if *extra > 0 {
                let batch = sample_range(&sampler, l, seed, levels[l].n, *extra)?;
                levels[l].merge(&batch);
            }
        }
        if finishing {
            return Ok(report(&levels, &inner_samples));
        }

        let costs: Vec<f64> = inner_samples.iter().map(|&m| m as f64).collect();
        let variances = floored_variances(&levels);
        let target = optimal_allocation(&variances, &costs, epsilon);
        pending = target
            .iter()
            .zip(&levels)
            .map(|(t, s)| t.saturating_sub(s.n))
            .collect();
        if pending.iter().zip(&levels).any(|(&extra, s)| extra as f64 > 0.01 * s.n as f64) {
            continue;
        }

        let finest = levels.len() - 1;
        let alpha = log2_slope(
            (1..=finest).map(|l| (inner_samples[l] as f64, levels[l].mean().abs())),
        )
        .map_or(0.5, |r| (-r.value).max(0.5));
        let remaining_bias = levels[finest].mean().abs() / (2f64.powf(alpha) - 1.0);
        if remaining_bias <= epsilon / std::f64::consts::SQRT_2 {
            finishing = true;
            continue;
        }
        if finest + 1 > options.max_levels {
            return Err(Error::NonConvergence {
                max_levels: options.max_levels,
                report: Box::new(report(&levels, &inner_samples)),
            });
        }

        let beta = log2_slope(
            (1..=finest).map(|l| (inner_samples[l] as f64, levels[l].variance())),
        )
        .map_or(0.5, |r| (-r.value).max(0.5));
        let new_level = finest + 1;
        inner_samples.push(config.schedule.inner_samples(new_level)?);
        levels.push(LevelStats::new(new_level));
        let mut variances = variances;
        variances.push(variances[finest] / 2f64.powf(beta));
        let costs: Vec<f64> = inner_samples.iter().map(|&m| m as f64).collect();
        let target = optimal_allocation(&variances, &costs, epsilon);
        pending = target
            .iter()
            .zip(&levels)
            .map(|(t, s)| t.saturating_sub(s.n))
            .collect();
        pending[new_level] = pending[new_level].max(MIN_NEW_LEVEL_DRAWS);
    }
}

/// Draws given to a freshly added level even when the allocation asks for
/// fewer, so that its mean and variance are defined.
const MIN_NEW_LEVEL_DRAWS: u64 = 4;

/// Level variances with zeros replaced by the smallest positive value.
fn floored_variances(levels: &[LevelStats]) -> Vec<f64> {
    levels
        .iter()
        .map(|s| {
            let v = s.variance();
            if v > 0.0 {
                v
            } else {
                f64::MIN_POSITIVE
            }
        })
        .collect()
}
