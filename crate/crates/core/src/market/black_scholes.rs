use super::OptionKind;
use crate::error::{Error, Result};
use crate::lds::normal_cdf;

/// Black–Scholes price of a European option.
pub fn bs_price(
    spot: f64,
    strike: f64,
    rate: f64,
    vol: f64,
    ttm: f64,
    kind: OptionKind,
) -> Result<f64> {
    if !(spot > 0.0 && spot.is_finite()) {
        return Err(Error::domain("spot", spot, "spot > 0"));
    }
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::domain("strike", strike, "strike > 0"));
    }
    if !(ttm > 0.0 && ttm.is_finite()) {
        return Err(Error::domain("time to maturity", ttm, "ttm > 0"));
    }
    if !(vol >= 0.0 && vol.is_finite()) {
        return Err(Error::domain("volatility", vol, "vol >= 0"));
    }
    if !rate.is_finite() {
        return Err(Error::domain("rate", rate, "finite"));
    }
    Ok(bs_price_unchecked(spot, strike, rate, vol, ttm, kind))
}

#[inline]
pub(crate) fn bs_price_unchecked(
    spot: f64,
    strike: f64,
    rate: f64,
    vol: f64,
    ttm: f64,
    kind: OptionKind,
) -> f64 {
    let discounted_strike = strike * (-rate * ttm).exp();
    let sd = vol * ttm.sqrt();
    if sd == 0.0 {
        return match kind {
            OptionKind::Call => (spot - discounted_strike).max(0.0),
            OptionKind::Put => (discounted_strike - spot).max(0.0),
        };
    }
    let d1 = ((spot / strike).ln() + rate * ttm) / sd + 0.5 * sd;
    let d2 = d1 - sd;
    match kind {
        OptionKind::Call => spot * normal_cdf(d1) - discounted_strike * normal_cdf(d2),
        OptionKind::Put => discounted_strike * normal_cdf(-d2) - spot * normal_cdf(-d1),
    }
}
