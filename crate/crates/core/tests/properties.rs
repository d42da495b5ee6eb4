mod common;

use std::time::Duration;

use common::{ks_critical, ks_two_sample, ks_uniform, mean_and_stderr};
use nestqmc::coupling::{sigmoid, CouplingConfig, CouplingKind, InnerSampling, LevelSampler};
use nestqmc::driver::{optimal_allocation, run_mlmc, sample_range, LevelStats, MlmcOptions, MlmcReport};
use nestqmc::lds::{generate_block, to_unit, verify_net_balance, DigitalSequenceSpec, ScrambleKey};
use nestqmc::market::{
    calibrate_threshold, cholesky, inner_gradient, CovarianceKind, FactorMatrix, Portfolio, Scenario,
};
use nestqmc::lds::BlockGenerator;
use proptest::prelude::*;

fn single_put(kind: CouplingKind, sampling: InnerSampling) -> (Portfolio, FactorMatrix, CouplingConfig) {
    let p = Portfolio::single_put();
    let a = cholesky(p.covariance()).unwrap();
    let c = calibrate_threshold(&p, 0.3).unwrap();
    let config = CouplingConfig::new(kind, sampling, c, 1);
    (p, a, config)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scrambled_prefixes_are_nets(seed in any::<u64>(), replicate in any::<u64>(), d in 1usize..=3, extra in 1u32..=12) {
        let spec = DigitalSequenceSpec::sobol(d).unwrap();
        let t = spec.t();
        let k = (t + extra).min(12);
        prop_assume!(k > t);
        let block = generate_block(&spec, 0, 1 << k, Some(ScrambleKey::new(seed, replicate))).unwrap();
        prop_assert!(verify_net_balance(&block, k, t).unwrap());
    }

    #[test]
    fn sigmoid_identities(x in -1e4f64..1e4, k in 1e-6f64..1e12) {
        prop_assert_eq!(sigmoid(0.0, k), 0.5);
        prop_assert!((sigmoid(x, k) + sigmoid(-x, k) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn allocation_is_optimal_against_perturbations(
        v in prop::collection::vec(1e-6f64..1.0, 5),
        c in prop::collection::vec(1.0f64..1e4, 5),
        dirs in prop::collection::vec(prop::collection::vec(0.2f64..5.0, 5), 16),
        eps in 1e-3f64..0.1,
    ) {
        let n = optimal_allocation(&v, &c, eps);
        let budget = eps * eps / 2.0;
        let variance: f64 = v.iter().zip(&n).map(|(v, n)| v / *n as f64).sum();
        prop_assert!(variance <= budget * (1.0 + 1e-12));
        let cost = |n: &[f64]| n.iter().zip(&c).map(|(n, c)| n * c).sum::<f64>();
        let opt: Vec<f64> = n.iter().map(|&x| x as f64).collect();
        let slack: f64 = c.iter().sum();
        for dir in &dirs {
            // scale an arbitrary direction onto the constraint surface
            let base: Vec<f64> = opt.iter().zip(dir).map(|(n, f)| n * f).collect();
            let s: f64 = v.iter().zip(&base).map(|(v, n)| v / n).sum::<f64>() / budget;
            let feasible: Vec<f64> = base.iter().map(|n| n * s).collect();
            prop_assert!(cost(&opt) <= cost(&feasible) + slack);
        }
    }

    #[test]
    fn merging_chunks_is_exact(
        ys in prop::collection::vec(-64i32..=64, 1..400),
        cuts in prop::collection::vec(0usize..400, 0..6),
    ) {
        let ys: Vec<f64> = ys.into_iter().map(|y| f64::from(y) / 8.0).collect();
        let mut whole = LevelStats::new(2);
        for &y in &ys {
            whole.push(y, 128);
        }
        let mut cuts: Vec<usize> = cuts.into_iter().map(|c| c % (ys.len() + 1)).collect();
        cuts.push(0);
        cuts.push(ys.len());
        cuts.sort_unstable();
        let mut merged = LevelStats::new(2);
        for w in cuts.windows(2) {
            let mut part = LevelStats::new(2);
            for &y in &ys[w[0]..w[1]] {
                part.push(y, 128);
            }
            merged.merge(&part);
        }
        prop_assert_eq!(merged, whole);
    }

    #[test]
    fn gradient_matches_finite_differences(
        shocks in prop::collection::vec(-2.0f64..2.0, 4),
        z in prop::collection::vec(-2.5f64..2.5, 4),
    ) {
        let p = Portfolio::call_basket(4, CovarianceKind::Exponential).unwrap();
        let a = cholesky(p.covariance()).unwrap();
        let omega = Scenario::new(shocks.iter().map(|s| 100.0 * (0.05 * s).exp()).collect()).unwrap();
        let grad = inner_gradient(&p, &a, &omega, &z);
        let f = nestqmc::market::InnerIntegrand::new(&p, &a).unwrap();
        let mut bases = vec![0.0; 4];
        f.bases(&omega, &mut bases);
        let h = 1e-5;
        for j in 0..4 {
            let mut up = z.clone();
            let mut down = z.clone();
            up[j] += h;
            down[j] -= h;
            // skip points within reach of a payoff kink
            let near_kink = [&up, &down, &z].iter().any(|zz| {
                f.terminal_prices(&bases, zz).iter().zip(p.strikes()).any(|(s, k)| (s - k).abs() < 1e-2)
            });
            if near_kink {
                continue;
            }
            let fd = (f.value(&bases, &up) - f.value(&bases, &down)) / (2.0 * h);
            prop_assert!((fd - grad[j]).abs() <= 1e-5 * (1.0 + grad[j].abs()), "j={} fd={} grad={}", j, fd, grad[j]);
        }
    }
}

#[test]
fn scrambled_coordinates_are_uniform_across_keys() {
    let spec = DigitalSequenceSpec::sobol(4).unwrap();
    let mut generator = BlockGenerator::new(&spec, 64).unwrap();
    let keys = 4096;
    let mut raw = vec![0u32; 64 * 4];
    let mut columns: Vec<Vec<f64>> = (0..3 * 4).map(|_| Vec::with_capacity(keys)).collect();
    for r in 0..keys as u64 {
        generator.fill(Some(ScrambleKey::new(17, r)), &mut raw);
        for (slot, &i) in [0usize, 1, 37].iter().enumerate() {
            for j in 0..4 {
                columns[slot * 4 + j].push(to_unit(raw[i * 4 + j]));
            }
        }
    }
    for col in &mut columns {
        assert!(ks_uniform(col) < ks_critical(keys, None));
    }
}

#[test]
fn antithetic_halves_are_exchangeable() {
    for (kind, sampling) in [
        (CouplingKind::SmoothedAntithetic, InnerSampling::Rqmc),
        (CouplingKind::SmoothedAntithetic, InnerSampling::Mc),
        (CouplingKind::Smoothed, InnerSampling::Rqmc),
    ] {
        let (p, a, config) = single_put(kind, sampling);
        let mut sampler = LevelSampler::new(&p, &a, &config).unwrap();
        let n = 3000u64;
        // disjoint draws keep the two samples independent
        let mut first: Vec<f64> = (0..n).map(|i| sampler.sample(3, 5, i).unwrap().halves[0]).collect();
        let mut second: Vec<f64> = (n..2 * n).map(|i| sampler.sample(3, 5, i).unwrap().halves[1]).collect();
        let d = ks_two_sample(&mut first, &mut second);
        assert!(d < ks_critical(n as usize, Some(n as usize)), "{kind}/{sampling}: D = {d}");
    }
}

#[test]
fn levels_telescope() {
    for (kind, sampling) in [
        (CouplingKind::Crude, InnerSampling::Mc),
        (CouplingKind::Crude, InnerSampling::Rqmc),
        (CouplingKind::Smoothed, InnerSampling::Rqmc),
        (CouplingKind::SmoothedAntithetic, InnerSampling::Rqmc),
    ] {
        let (p, a, config) = single_put(kind, sampling);
        let mut sampler = LevelSampler::new(&p, &a, &config).unwrap();
        let n = 20_000u64;
        for level in 1..=4 {
            let coarse: Vec<f64> = (0..n).map(|i| sampler.sample(level, 11, i).unwrap().coarse).collect();
            let fine: Vec<f64> = (0..n).map(|i| sampler.sample(level - 1, 11, i).unwrap().fine).collect();
            let (mc, sc) = mean_and_stderr(&coarse);
            let (mf, sf) = mean_and_stderr(&fine);
            let tol = 3.0 * (sc * sc + sf * sf).sqrt();
            assert!((mc - mf).abs() <= tol, "{kind}/{sampling} level {level}: {mc} vs {mf} (3σ = {tol})");
        }
    }
}

#[test]
fn chunked_batches_match_a_single_batch() {
    let (p, a, config) = single_put(CouplingKind::Smoothed, InnerSampling::Rqmc);
    let sampler = LevelSampler::new(&p, &a, &config).unwrap();
    let whole = sample_range(&sampler, 2, 3, 0, 1000).unwrap();
    let mut merged = sample_range(&sampler, 2, 3, 0, 512).unwrap();
    merged.merge(&sample_range(&sampler, 2, 3, 512, 488).unwrap());
    assert_eq!(merged.n, whole.n);
    assert_eq!(merged.cost, whole.cost);
    for (x, y) in merged.sums.iter().zip(&whole.sums) {
        assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
    }
}

/// Debug rendering without the wall time; floats print round-trip exact and
/// undefined standard errors (NaN) compare equal.
fn without_clock(mut r: MlmcReport) -> String {
    r.wall_time = Duration::ZERO;
    format!("{r:?}")
}

#[test]
fn reports_are_identical_for_any_thread_count() {
    for (kind, sampling) in [
        (CouplingKind::Crude, InnerSampling::Mc),
        (CouplingKind::Smoothed, InnerSampling::Rqmc),
    ] {
        let (p, a, config) = single_put(kind, sampling);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_mlmc(&p, &a, &config, 0.02, 42, &MlmcOptions::default()).unwrap())
        };
        let reference = without_clock(run(1));
        for threads in [2, 3, 7] {
            assert_eq!(without_clock(run(threads)), reference, "{kind}/{sampling} with {threads} threads");
        }
    }
}
