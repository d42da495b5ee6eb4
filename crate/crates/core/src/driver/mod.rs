//! Estimators and studies built on the level samplers.
//!
//! Draw `i` at level `ℓ` is a pure function of `(seed, ℓ, i)`. Batches are
//! cut into fixed-size chunks whose statistics are merged in index order, so
//! every result is bit-identical for any number of worker threads.

mod mlmc;
mod rates;
mod stats;
mod studies;

pub use mlmc::{optimal_allocation, run_mlmc, MlmcOptions, MlmcReport};
pub use rates::{estimate_rates, linear_fit, log2_slope, Rate, RateEstimates};
pub use stats::{level_statistics, LevelStats, LevelSummary};
pub use studies::{
    run_complexity_sweep, run_convergence_study, run_eta_study, sample_scenarios, ComplexityCell,
    ConvergenceStudy, EtaStudy,
};

use rayon::prelude::*;

use crate::coupling::{CouplingConfig, InnerStream, LevelSampler};
use crate::error::{Error, Result};
use crate::market::{FactorMatrix, Portfolio};

/// Draws per work item.
const CHUNK: u64 = 256;

/// Statistics of draws `start..start+count` at `level`.
pub fn sample_range(
    sampler: &LevelSampler,
    level: usize,
    seed: u64,
    start: u64,
    count: u64,
) -> Result<LevelStats> {
    let chunks = count.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map_init(
            || sampler.clone(),
            |s, c| {
                let lo = start + c * CHUNK;
                let hi = (lo + CHUNK).min(start + count);
                let mut stats = LevelStats::new(level);
                for i in lo..hi {
                    let draw = s.sample(level, seed, i)?;
                    stats.push(draw.y, draw.cost);
                }
                Ok(stats)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut total = LevelStats::new(level);
    for part in &parts {
        total.merge(part);
    }
    Ok(total)
}

/// Result of the single-level nested estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestedEstimate {
    pub estimate: f64,
    /// Binomial standard error `√(θ̂(1-θ̂)/n)`.
    pub stderr: f64,
    /// Inner evaluations, `n·m`.
    pub cost: u64,
}

/// Level tag of the outer scenarios used by [`run_uniform_nested`].
const NESTED_STREAM: usize = usize::MAX;

/// Fraction of `n` scenarios whose `m`-point inner mean exceeds the
/// threshold. The indicator is used whatever the coupling kind.
pub fn run_uniform_nested(
    p: &Portfolio,
    a: &FactorMatrix,
    config: &CouplingConfig,
    n: u64,
    m: usize,
    seed: u64,
) -> Result<NestedEstimate> {
    if n == 0 || m == 0 {
        return Err(Error::config("nested estimator needs n >= 1 and m >= 1"));
    }
    let sampler = LevelSampler::new(p, a, config)?;
    let chunks = n.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map_init(
            || sampler.clone(),
            |s, c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(n);
                let mut hits = 0u64;
                for i in lo..hi {
                    let omega = s.scenario(seed, NESTED_STREAM, i)?;
                    let stream = InnerStream::for_draw(config.sampling, seed, NESTED_STREAM, i);
                    if s.inner_mean(&omega, m, stream)? > config.threshold {
                        hits += 1;
                    }
                }
                Ok(hits)
            },
        )
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let estimate = hits as f64 / n as f64;
    Ok(NestedEstimate {
        estimate,
        stderr: (estimate * (1.0 - estimate) / n as f64).sqrt(),
        cost: n * m as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{CouplingKind, InnerSampling};
    use crate::market::{calibrate_threshold, cholesky};

    #[test]
    fn chunked_sampling_is_thread_count_independent() {
        let p = Portfolio::single_put();
        let a = cholesky(p.covariance()).unwrap();
        let c = calibrate_threshold(&p, 0.3).unwrap();
        let config = CouplingConfig::new(CouplingKind::Smoothed, InnerSampling::Rqmc, c, 1);
        let sampler = LevelSampler::new(&p, &a, &config).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_range(&sampler, 2, 42, 100, 3000).unwrap())
        };
        let one = run(1);
        assert_eq!(one.n, 3000);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn nested_estimator_degenerate_threshold() {
        let p = Portfolio::single_put();
        let a = cholesky(p.covariance()).unwrap();
        let config = CouplingConfig::new(CouplingKind::Crude, InnerSampling::Rqmc, -1e9, 1);
        let r = run_uniform_nested(&p, &a, &config, 500, 16, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.cost, 8000);
    }
}
