use rayon::prelude::*;

use super::mlmc::{run_mlmc, MlmcOptions};
use super::rates::{estimate_rates, log2_slope, Rate, RateEstimates};
use super::sample_range;
use super::stats::{level_statistics, LevelStats, LevelSummary};
use crate::coupling::{CouplingConfig, InnerSampling, InnerStream, LevelSampler};
use crate::error::{Error, Result};
use crate::lds::derive_key;
use crate::market::{FactorMatrix, Portfolio, Scenario};

/// Per-level table of a fixed-budget run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub levels: Vec<LevelStats>,
    pub summaries: Vec<LevelSummary>,
    pub inner_samples: Vec<usize>,
    pub rates: RateEstimates,
}

/// Samples `n_per_level` draws at every level `0..=l_max` and fits the
/// rates over `ℓ ≥ 1`.
pub fn run_convergence_study(
    p: &Portfolio,
    a: &FactorMatrix,
    config: &CouplingConfig,
    l_max: usize,
    n_per_level: u64,
    seed: u64,
) -> Result<ConvergenceStudy> {
    if n_per_level < 1000 {
        return Err(Error::config(format!(
            "convergence study needs at least 1000 draws per level, got {n_per_level}"
        )));
    }
    let sampler = LevelSampler::new(p, a, config)?;
    let inner_samples = (0..=l_max)
        .map(|l| config.schedule.inner_samples(l))
        .collect::<Result<Vec<_>>>()?;
    let levels = (0..=l_max)
        .map(|l| sample_range(&sampler, l, seed, 0, n_per_level))
        .collect::<Result<Vec<_>>>()?;
    let summaries = levels.iter().map(level_statistics).collect::<Result<Vec<_>>>()?;
    let rates = estimate_rates(&summaries, &inner_samples);
    Ok(ConvergenceStudy {
        levels,
        summaries,
        inner_samples,
        rates,
    })
}

/// Inner-variance decay per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaStudy {
    pub m_grid: Vec<usize>,
    /// `variances[s][k]`: variance of the `m_grid[k]`-point inner mean of
    /// scenario `s` across replicates.
    pub variances: Vec<Vec<f64>>,
    /// `η̂` per scenario; `None` when a variance vanishes.
    pub per_scenario: Vec<Option<Rate>>,
    /// Mean of the defined per-scenario estimates, with the standard error
    /// of that mean.
    pub pooled: Option<Rate>,
}

const ETA_STREAM: u64 = 0x0065_7461;
const SCENARIO_STREAM: usize = usize::MAX - 1;

/// `count` outer scenarios drawn from the counter-based outer stream.
pub fn sample_scenarios(p: &Portfolio, count: usize, seed: u64) -> Result<Vec<Scenario>> {
    let a = crate::market::cholesky(p.covariance())?;
    let config = CouplingConfig::new(crate::coupling::CouplingKind::Crude, InnerSampling::Mc, 0.0, p.dimension());
    let mut sampler = LevelSampler::new(p, &a, &config)?;
    (0..count as u64).map(|i| sampler.scenario(seed, SCENARIO_STREAM, i)).collect()
}

/// For every scenario and every `m` in `m_grid`, the variance of the inner
/// mean across `replicates` independent randomizations, and the fitted
/// decay exponent `η̂ = -d log2 Var / d log2 m`.
pub fn run_eta_study(
    p: &Portfolio,
    a: &FactorMatrix,
    sampling: InnerSampling,
    scenarios: &[Scenario],
    m_grid: &[usize],
    replicates: u64,
    seed: u64,
) -> Result<EtaStudy> {
    if replicates < 16 {
        return Err(Error::config(format!("eta study needs at least 16 replicates, got {replicates}")));
    }
    if m_grid.len() < 2 || m_grid.iter().any(|m| !m.is_power_of_two()) {
        return Err(Error::config("eta study needs at least two power-of-two sample sizes"));
    }
    let config = CouplingConfig::new(crate::coupling::CouplingKind::Crude, sampling, 0.0, p.dimension());
    let sampler = LevelSampler::new(p, a, &config)?;
    let variances = scenarios
        .par_iter()
        .enumerate()
        .map_init(
            || sampler.clone(),
            |s, (index, omega)| {
                let stream_seed = derive_key(&[seed, ETA_STREAM, index as u64]);
                m_grid
                    .iter()
                    .enumerate()
                    .map(|(k, &m)| {
                        let means = (0..replicates)
                            .map(|r| s.inner_mean(omega, m, InnerStream::for_draw(sampling, stream_seed, k, r)))
                            .collect::<Result<Vec<_>>>()?;
                        // shifted by the first replicate so identical means give exactly 0
                        let n = means.len() as f64;
                        let shifted: Vec<f64> = means.iter().map(|x| x - means[0]).collect();
                        let mean = shifted.iter().sum::<f64>() / n;
                        Ok(shifted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
                    })
                    .collect::<Result<Vec<f64>>>()
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let per_scenario: Vec<Option<Rate>> = variances
        .iter()
        .map(|vars| {
            if vars.iter().any(|v| !(*v > 0.0)) {
                return None;
            }
            log2_slope(m_grid.iter().zip(vars).map(|(&m, &v)| (m as f64, v))).map(|r| Rate {
                value: -r.value,
                stderr: r.stderr,
            })
        })
        .collect();
    let defined: Vec<f64> = per_scenario.iter().flatten().map(|r| r.value).collect();
    let pooled = (!defined.is_empty()).then(|| {
        let n = defined.len() as f64;
        let mean = defined.iter().sum::<f64>() / n;
        let stderr = if defined.len() > 1 {
            (defined.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
        Rate { value: mean, stderr }
    });
    Ok(EtaStudy {
        m_grid: m_grid.to_vec(),
        variances,
        per_scenario,
        pooled,
    })
}

/// Mean cost and error of repeated MLMC runs at one tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityCell {
    pub coupling: String,
    pub epsilon: f64,
    /// Runs that converged.
    pub runs: usize,
    pub failures: usize,
    pub mean_cost: f64,
    /// Root mean square error of the converged runs against the reference.
    pub rmse: f64,
    /// `ε²·mean_cost`
    pub eps2_cost: f64,
}

/// Runs [`run_mlmc`] `repeats` times for every coupling and tolerance.
/// A run that fails to converge is counted, not propagated.
pub fn run_complexity_sweep(
    p: &Portfolio,
    couplings: &[(CouplingConfig, FactorMatrix)],
    eps_list: &[f64],
    repeats: usize,
    seed: u64,
    reference: f64,
    options: &MlmcOptions,
) -> Result<Vec<ComplexityCell>> {
    if repeats < 3 {
        return Err(Error::config(format!("complexity sweep needs at least 3 repeats, got {repeats}")));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("tolerances must be listed in decreasing order"));
    }
    let mut cells = Vec::new();
    for (ci, (config, a)) in couplings.iter().enumerate() {
        for (ei, &eps) in eps_list.iter().enumerate() {
            let mut costs = Vec::new();
            let mut sq_errors = Vec::new();
            let mut failures = 0;
            for r in 0..repeats {
                let run_seed = derive_key(&[seed, ci as u64, ei as u64, r as u64]);
                match run_mlmc(p, a, config, eps, run_seed, options) {
                    Ok(report) => {
                        costs.push(report.total_cost as f64);
                        sq_errors.push((report.estimate - reference).powi(2));
                    }
                    Err(Error::NonConvergence { .. }) => failures += 1,
                    Err(e) => return Err(e),
                }
            }
            let runs = costs.len();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            let mean_cost = mean(&costs);
            cells.push(ComplexityCell {
                coupling: config.label(),
                epsilon: eps,
                runs,
                failures,
                mean_cost,
                rmse: mean(&sq_errors).sqrt(),
                eps2_cost: eps * eps * mean_cost,
            });
        }
    }
    Ok(cells)
}
