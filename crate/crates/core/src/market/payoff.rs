use super::black_scholes::bs_price_unchecked;
use super::{FactorMatrix, OptionKind, Portfolio, Scenario};
use crate::error::{Error, Result};
use crate::lds::gaussian_from_unit;

/// Scenario at the risk horizon reached from standard normals `z` under the
/// real-world drift.
pub fn sample_scenario(p: &Portfolio, z: &[f64]) -> Result<Scenario> {
    let d = p.dimension();
    if z.len() != d {
        return Err(Error::config(format!("expected {d} normals, got {}", z.len())));
    }
    if let Some(&bad) = z.iter().find(|x| !x.is_finite()) {
        return Err(Error::domain("z", bad, "finite"));
    }
    let tau = p.tau();
    let sqrt_tau = tau.sqrt();
    let sigma = p.sigma();
    let prices = (0..d)
        .map(|i| {
            let vol = p.vols()[i];
            let shock: f64 = (0..d).map(|j| sigma[(i, j)] * z[j]).sum();
            p.s0()[i] * ((p.mu() - 0.5 * vol * vol) * tau + sqrt_tau * shock).exp()
        })
        .collect();
    Scenario::new(prices)
}

/// Conditional loss `g(ω)`: `V0` minus the Black–Scholes value of the
/// portfolio at the risk horizon.
pub fn exact_loss(p: &Portfolio, omega: &Scenario) -> f64 {
    let h = p.horizon();
    let value: f64 = (0..p.dimension())
        .map(|i| {
            bs_price_unchecked(
                omega.prices()[i],
                p.strikes()[i],
                p.mu0(),
                p.vols()[i],
                h,
                p.kinds()[i],
            )
        })
        .sum();
    p.v0() - value
}

/// One inner sample of the loss given `omega`, driven by the point `u`.
pub fn inner_payoff(p: &Portfolio, a: &FactorMatrix, omega: &Scenario, u: &[f64]) -> Result<f64> {
    let d = p.dimension();
    if u.len() != d || omega.dimension() != d {
        return Err(Error::config(format!(
            "point and scenario must have dimension {d}"
        )));
    }
    if let Some(&bad) = u.iter().find(|x| !(0.0..1.0).contains(*x)) {
        return Err(Error::domain("u", bad, "0 <= u < 1"));
    }
    let f = InnerIntegrand::new(p, a)?;
    let mut bases = vec![0.0; d];
    f.bases(omega, &mut bases);
    let z: Vec<f64> = u.iter().map(|&x| gaussian_from_unit(x)).collect();
    Ok(f.value(&bases, &z))
}

/// The inner integrand with all scenario-independent constants folded in.
///
/// Per scenario, [`bases`](Self::bases) computes `ω_i·exp((μ0 - vol_i²/2)h)`;
/// the payoff at normals `z` is then `V0 - e^{-μ0 h} Σ payoff_i(base_i·exp(√h (Az)_i))`.
#[derive(Debug, Clone)]
pub struct InnerIntegrand {
    d: usize,
    // √h·A, row-major, each row truncated after its last nonzero entry
    scaled: Vec<f64>,
    row_len: Vec<usize>,
    growth: Vec<f64>,
    strikes: Vec<f64>,
    kinds: Vec<OptionKind>,
    discount: f64,
    v0: f64,
}

impl InnerIntegrand {
    pub fn new(p: &Portfolio, a: &FactorMatrix) -> Result<Self> {
        let d = p.dimension();
        if a.dimension() != d {
            return Err(Error::config(format!(
                "factor has dimension {}, portfolio {d}",
                a.dimension()
            )));
        }
        let h = p.horizon();
        let sqrt_h = h.sqrt();
        let m = a.matrix();
        let mut scaled = vec![0.0; d * d];
        let mut row_len = vec![0; d];
        for i in 0..d {
            for j in 0..d {
                scaled[i * d + j] = sqrt_h * m[(i, j)];
                if m[(i, j)] != 0.0 {
                    row_len[i] = j + 1;
                }
            }
        }
        Ok(Self {
            d,
            scaled,
            row_len,
            growth: p
                .vols()
                .iter()
                .map(|v| ((p.mu0() - 0.5 * v * v) * h).exp())
                .collect(),
            strikes: p.strikes().to_vec(),
            kinds: p.kinds().to_vec(),
            discount: (-p.mu0() * h).exp(),
            v0: p.v0(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn bases(&self, omega: &Scenario, out: &mut [f64]) {
        for ((o, &w), &g) in out.iter_mut().zip(omega.prices()).zip(&self.growth) {
            *o = w * g;
        }
    }

    #[inline]
    fn log_return(&self, i: usize, z: &[f64]) -> f64 {
        let row = &self.scaled[i * self.d..i * self.d + self.row_len[i]];
        row.iter().zip(z).map(|(a, z)| a * z).sum()
    }

    /// Prices at maturity for normals `z`.
    pub fn terminal_prices(&self, bases: &[f64], z: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| bases[i] * self.log_return(i, z).exp())
            .collect()
    }

    /// Inner payoff for standard normals `z`.
    #[inline]
    pub fn value(&self, bases: &[f64], z: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.d {
            let s = bases[i] * self.log_return(i, z).exp();
            total += self.kinds[i].payoff(s, self.strikes[i]);
        }
        self.v0 - self.discount * total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lds::{generate_block, DigitalSequenceSpec, ScrambleKey};
    use crate::market::{bs_price, cholesky, CovarianceKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn put() -> (Portfolio, FactorMatrix) {
        let p = Portfolio::single_put();
        let a = cholesky(p.covariance()).unwrap();
        (p, a)
    }

    #[test]
    fn scenario_at_zero_shock_follows_the_drift() {
        let (p, _) = put();
        let omega = sample_scenario(&p, &[0.0]).unwrap();
        let expected = 100.0 * ((0.08 - 0.02) / 52.0f64).exp();
        assert!((omega.prices()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn opposite_shocks_straddle_the_drift_path() {
        let p = Portfolio::call_basket(3, CovarianceKind::Exponential).unwrap();
        let z = [0.3, -1.2, 2.0];
        let neg: Vec<f64> = z.iter().map(|x| -x).collect();
        let up = sample_scenario(&p, &z).unwrap();
        let down = sample_scenario(&p, &neg).unwrap();
        let mid = sample_scenario(&p, &[0.0; 3]).unwrap();
        for i in 0..3 {
            let gm = (up.prices()[i] * down.prices()[i]).sqrt();
            assert!((gm - mid.prices()[i]).abs() < 1e-10);
        }
        assert!(sample_scenario(&p, &[0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn diagonal_factor_gives_uncorrelated_log_prices() {
        let sigma = nalgebra::DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.3]);
        let mut params = Portfolio::single_put().params().clone();
        params.s0 = vec![100.0; 2];
        params.strikes = vec![95.0; 2];
        params.kinds = vec![OptionKind::Put; 2];
        params.sigma = sigma;
        let p = Portfolio::new(params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
            let w = sample_scenario(&p, &z).unwrap();
            let (x, y) = (w.prices()[0].ln(), w.prices()[1].ln());
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx * sy / nf / nf;
        let vx = sxx / nf - (sx / nf).powi(2);
        let vy = syy / nf - (sy / nf).powi(2);
        let se = (vx * vy / nf).sqrt();
        assert!(cov.abs() < 3.0 * se, "cov {cov} se {se}");
    }

    #[test]
    fn payoff_at_the_median_point() {
        let (p, a) = put();
        let omega = Scenario::new(vec![100.0]).unwrap();
        let h: f64 = 0.25 - 1.0 / 52.0;
        let s_t: f64 = 100.0 * ((0.03 - 0.02) * h).exp();
        let expected = p.v0() - (-0.03 * h).exp() * (95.0 - s_t).max(0.0);
        assert!((inner_payoff(&p, &a, &omega, &[0.5]).unwrap() - expected).abs() < 1e-13);
        assert!(inner_payoff(&p, &a, &omega, &[1.0]).is_err());
        assert!(inner_payoff(&p, &a, &omega, &[0.0]).unwrap().is_finite());
    }

    #[test]
    fn put_payoff_is_monotone_in_u() {
        let (p, a) = put();
        let omega = Scenario::new(vec![96.0]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            let v = inner_payoff(&p, &a, &omega, &[u]).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn exact_loss_definition_and_monotonicity() {
        let (p, _) = put();
        let omega = Scenario::new(vec![100.0]).unwrap();
        let g = exact_loss(&p, &omega);
        let direct = p.v0() - bs_price(100.0, 95.0, 0.03, 0.2, 0.25 - 1.0 / 52.0, OptionKind::Put).unwrap();
        assert_eq!(g, direct);
        let mut prev = f64::NEG_INFINITY;
        for i in 1..400 {
            let w = 60.0 + i as f64 * 0.2;
            let g = exact_loss(&p, &Scenario::new(vec![w]).unwrap());
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn scrambled_average_matches_exact_loss() {
        for (p, omega) in [
            (Portfolio::single_put(), vec![97.0]),
            (
                Portfolio::call_basket(4, CovarianceKind::Exponential).unwrap(),
                vec![96.0, 101.0, 99.0, 94.0],
            ),
        ] {
            let a = cholesky(p.covariance()).unwrap();
            let omega = Scenario::new(omega).unwrap();
            let exact = exact_loss(&p, &omega);
            let spec = DigitalSequenceSpec::sobol(p.dimension()).unwrap();
            let f = InnerIntegrand::new(&p, &a).unwrap();
            let mut bases = vec![0.0; p.dimension()];
            f.bases(&omega, &mut bases);
            let reps = 16;
            let means: Vec<f64> = (0..reps)
                .map(|r| {
                    let block = generate_block(&spec, 0, 1 << 14, Some(ScrambleKey::new(5, r))).unwrap();
                    let mut z = vec![0.0; p.dimension()];
                    block
                        .points()
                        .map(|u| {
                            for (zj, &uj) in z.iter_mut().zip(u) {
                                *zj = gaussian_from_unit(uj);
                            }
                            f.value(&bases, &z)
                        })
                        .sum::<f64>()
                        / block.len() as f64
                })
                .collect();
            let mean = means.iter().sum::<f64>() / reps as f64;
            let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            assert!((mean - exact).abs() <= 3.0 * se + 1e-12, "{mean} vs {exact}, se {se}");
        }
    }
}
