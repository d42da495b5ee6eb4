use super::black_scholes::bs_price_unchecked;
use super::{OptionKind, Portfolio};
use crate::error::{Error, Result};
use crate::lds::normal_cdf;

/// Multi-asset portfolios use the threshold `c = 0.2·V0`.
pub const MULTI_ASSET_THRESHOLD_FRACTION: f64 = 0.2;

const THRESHOLD_TOLERANCE: f64 = 1e-8;
const SHOCK_RANGE: f64 = 12.0;

/// Loss as a function of the outer standard normal shock (single asset).
fn loss_at_shock(p: &Portfolio, z: f64) -> f64 {
    let vol = p.vols()[0];
    let tau = p.tau();
    let omega = p.s0()[0] * ((p.mu() - 0.5 * vol * vol) * tau + vol * tau.sqrt() * z).exp();
    p.v0() - bs_price_unchecked(omega, p.strikes()[0], p.mu0(), vol, p.horizon(), p.kinds()[0])
}

fn single_asset(p: &Portfolio) -> Result<()> {
    if p.dimension() != 1 {
        return Err(Error::config(format!(
            "analytic loss distribution needs a single asset, portfolio has {}",
            p.dimension()
        )));
    }
    if p.vols()[0] == 0.0 {
        return Err(Error::config("analytic loss distribution needs a positive volatility"));
    }
    Ok(())
}

/// `P[g(ω) > c]` for a single-asset portfolio.
///
/// The loss is monotone in the outer shock (increasing for a put,
/// decreasing for a call), so the probability is a normal tail beyond the
/// shock where the loss crosses `c`.
pub fn loss_probability(p: &Portfolio, c: f64) -> Result<f64> {
    single_asset(p)?;
    let increasing = p.kinds()[0] == OptionKind::Put;
    let (mut lo, mut hi) = (-SHOCK_RANGE, SHOCK_RANGE);
    let above = |z: f64| loss_at_shock(p, z) > c;
    // outside the range the tail mass is below 1e-32
    if increasing {
        if above(lo) {
            return Ok(1.0);
        }
        if !above(hi) {
            return Ok(0.0);
        }
    } else {
        if above(hi) {
            return Ok(1.0);
        }
        if !above(lo) {
            return Ok(0.0);
        }
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if above(mid) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    Ok(if increasing { normal_cdf(-z) } else { normal_cdf(z) })
}

/// Threshold `c` with `P[g(ω) > c] = target`.
///
/// Single asset: bisection on the analytic loss distribution over
/// `[g(S0·e^{-10σ√τ}), g(S0·e^{10σ√τ})]`. Several assets: `0.2·V0`; the
/// target is only validated.
pub fn calibrate_threshold(p: &Portfolio, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::domain("target probability", target, "0 < target < 1"));
    }
    if p.dimension() > 1 {
        return Ok(MULTI_ASSET_THRESHOLD_FRACTION * p.v0());
    }
    single_asset(p)?;
    let vol = p.vols()[0];
    let at_spot = |shift: f64| {
        let omega = p.s0()[0] * shift.exp();
        p.v0() - bs_price_unchecked(omega, p.strikes()[0], p.mu0(), vol, p.horizon(), p.kinds()[0])
    };
    let reach = 10.0 * vol * p.tau().sqrt();
    let (a, b) = (at_spot(-reach), at_spot(reach));
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let excess = |c: f64| loss_probability(p, c).map(|q| q - target);
    let f_lo = excess(lo)?;
    let f_hi = excess(hi)?;
    if !(f_lo >= 0.0 && f_hi <= 0.0) {
        return Err(Error::RootFinding(format!(
            "target {target} is not bracketed by thresholds [{lo}, {hi}]"
        )));
    }
    while hi - lo > THRESHOLD_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{exact_loss, CovarianceKind, Scenario};

    #[test]
    fn single_put_threshold() {
        let p = Portfolio::single_put();
        let c = calibrate_threshold(&p, 0.3).unwrap();
        // 0.476887256 from a 30-digit evaluation of the same construction
        assert!((c - 0.476_887_256).abs() < 1e-7, "c = {c}");
        assert!((c - 0.476887).abs() < 1e-4);
        // c is bracketed to 1e-8 and the loss density at c is below 1
        assert!((loss_probability(&p, c).unwrap() - 0.3).abs() < 1e-8);
    }

    #[test]
    fn median_target_hits_the_median_scenario() {
        let p = Portfolio::single_put();
        let c = calibrate_threshold(&p, 0.5).unwrap();
        let median = 100.0 * ((0.08 - 0.02) / 52.0f64).exp();
        let g = exact_loss(&p, &Scenario::new(vec![median]).unwrap());
        assert!((c - g).abs() < 1e-7);
    }

    #[test]
    fn multi_asset_uses_a_fraction_of_value() {
        let p = Portfolio::call_basket(4, CovarianceKind::Exponential).unwrap();
        assert_eq!(calibrate_threshold(&p, 0.3).unwrap(), 0.2 * p.v0());
        assert!(loss_probability(&p, 0.0).is_err());
    }

    #[test]
    fn rejects_invalid_targets() {
        let p = Portfolio::single_put();
        for t in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(calibrate_threshold(&p, t).is_err());
        }
        // beyond the bracket
        assert!(matches!(calibrate_threshold(&p, 1e-30), Err(Error::RootFinding(_))));
    }

    #[test]
    fn call_loss_probability_is_monotone() {
        let mut params = Portfolio::single_put().params().clone();
        params.kinds = vec![OptionKind::Call];
        let p = Portfolio::new(params).unwrap();
        let mut prev = 1.0;
        for i in 0..50 {
            let c = -3.0 + i as f64 * 0.15;
            let q = loss_probability(&p, c).unwrap();
            assert!(q <= prev);
            prev = q;
        }
        let c = calibrate_threshold(&p, 0.3).unwrap();
        assert!((loss_probability(&p, c).unwrap() - 0.3).abs() < 1e-7);
    }
}
