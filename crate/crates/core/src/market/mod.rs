//! Black–Scholes option portfolios.
//!
//! A [`Portfolio`] holds `d` correlated geometric Brownian motions and one
//! European option per asset. Scenarios are the asset prices at the risk
//! horizon `τ` under the real-world drift `μ`; the inner payoff revalues the
//! options at maturity under the risk-free rate `μ0`.

mod black_scholes;
mod calibrate;
mod factor;
mod file;
mod payoff;

pub use black_scholes::bs_price;
pub use calibrate::{calibrate_threshold, loss_probability, MULTI_ASSET_THRESHOLD_FRACTION};
pub use factor::{
    build_covariance, build_factor, cholesky, gpca_rotation, inner_gradient,
    rotation_from_gradients, CovarianceKind, FactorKind, FactorMatrix, GpcaPilot,
};
pub use file::{parse_portfolio, read_portfolio};
pub use payoff::{exact_loss, inner_payoff, sample_scenario, InnerIntegrand};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptionKind {
    Put,
    Call,
}

impl OptionKind {
    #[inline]
    pub fn payoff(self, spot: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (spot - strike).max(0.0),
            OptionKind::Put => (strike - spot).max(0.0),
        }
    }
}

impl FromStr for OptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "put" => Ok(OptionKind::Put),
            "call" => Ok(OptionKind::Call),
            other => Err(Error::config(format!("unknown option kind '{other}'"))),
        }
    }
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionKind::Put => "put",
            OptionKind::Call => "call",
        })
    }
}

/// Asset prices at the risk horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    prices: Vec<f64>,
}

impl Scenario {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::config("a scenario needs at least one price"));
        }
        if let Some(&bad) = prices.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::domain("scenario price", bad, "price > 0"));
        }
        Ok(Self { prices })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn dimension(&self) -> usize {
        self.prices.len()
    }
}

/// Inputs of [`Portfolio::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioParams {
    pub s0: Vec<f64>,
    /// Real-world drift, per year.
    pub mu: f64,
    /// Risk-free rate, per year.
    pub mu0: f64,
    /// Volatility factor `Σ`; the log-price covariance per year is `ΣΣᵀ`.
    pub sigma: DMatrix<f64>,
    pub strikes: Vec<f64>,
    pub maturity: f64,
    pub tau: f64,
    pub kinds: Vec<OptionKind>,
}

/// A validated portfolio with its derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    params: PortfolioParams,
    covariance: DMatrix<f64>,
    vols: Vec<f64>,
    v0: f64,
}

impl Portfolio {
    pub fn new(params: PortfolioParams) -> Result<Self> {
        let d = params.s0.len();
        if d == 0 {
            return Err(Error::config("portfolio needs at least one asset"));
        }
        if params.strikes.len() != d || params.kinds.len() != d {
            return Err(Error::config(format!(
                "portfolio has {d} prices but {} strikes and {} option kinds",
                params.strikes.len(),
                params.kinds.len()
            )));
        }
        if params.sigma.shape() != (d, d) {
            return Err(Error::config(format!(
                "volatility factor is {:?}, expected {d}x{d}",
                params.sigma.shape()
            )));
        }
        for &s in &params.s0 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::domain("s0", s, "s0 > 0"));
            }
        }
        for &k in &params.strikes {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::domain("strike", k, "strike > 0"));
            }
        }
        if !(params.tau > 0.0) {
            return Err(Error::domain("tau", params.tau, "0 < tau < maturity"));
        }
        if !(params.maturity > params.tau && params.maturity.is_finite()) {
            return Err(Error::domain("maturity", params.maturity, "maturity > tau"));
        }
        if !(params.mu.is_finite() && params.mu0.is_finite()) {
            return Err(Error::config("drifts must be finite"));
        }
        if params.sigma.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("volatility factor must be finite"));
        }
        let covariance = &params.sigma * params.sigma.transpose();
        cholesky(&covariance)?;
        let vols: Vec<f64> = (0..d)
            .map(|i| params.sigma.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let mut v0 = 0.0;
        for i in 0..d {
            v0 += bs_price(
                params.s0[i],
                params.strikes[i],
                params.mu0,
                vols[i],
                params.maturity,
                params.kinds[i],
            )?;
        }
        Ok(Self {
            params,
            covariance,
            vols,
            v0,
        })
    }

    /// Portfolio whose volatility factor is the Cholesky factor of `covariance`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_covariance(
        s0: Vec<f64>,
        mu: f64,
        mu0: f64,
        covariance: &DMatrix<f64>,
        strikes: Vec<f64>,
        maturity: f64,
        tau: f64,
        kinds: Vec<OptionKind>,
    ) -> Result<Self> {
        let sigma = cholesky(covariance)?.into_matrix();
        Self::new(PortfolioParams {
            s0,
            mu,
            mu0,
            sigma,
            strikes,
            maturity,
            tau,
            kinds,
        })
    }

    /// One put: `S0 = 100`, `K = 95`, `σ = 0.2`, `μ = 0.08`, `μ0 = 0.03`,
    /// `T = 0.25`, `τ = 1/52`.
    pub fn single_put() -> Self {
        Self::new(PortfolioParams {
            s0: vec![100.0],
            mu: 0.08,
            mu0: 0.03,
            sigma: DMatrix::from_element(1, 1, 0.2),
            strikes: vec![95.0],
            maturity: 0.25,
            tau: 1.0 / 52.0,
            kinds: vec![OptionKind::Put],
        })
        .expect("preset is valid")
    }

    /// `d` calls on correlated assets: `S0 = 100`, `K = 95`, `μ = 0.08`,
    /// `μ0 = 0.05`, `T = 0.1`, `τ = 0.02`, covariance from `kind`.
    pub fn call_basket(d: usize, kind: CovarianceKind) -> Result<Self> {
        let c = build_covariance(kind, d)?;
        Self::with_covariance(
            vec![100.0; d],
            0.08,
            0.05,
            &c,
            vec![95.0; d],
            0.1,
            0.02,
            vec![OptionKind::Call; d],
        )
    }

    pub fn dimension(&self) -> usize {
        self.params.s0.len()
    }

    pub fn params(&self) -> &PortfolioParams {
        &self.params
    }

    pub fn s0(&self) -> &[f64] {
        &self.params.s0
    }

    pub fn mu(&self) -> f64 {
        self.params.mu
    }

    pub fn mu0(&self) -> f64 {
        self.params.mu0
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.params.sigma
    }

    pub fn strikes(&self) -> &[f64] {
        &self.params.strikes
    }

    pub fn kinds(&self) -> &[OptionKind] {
        &self.params.kinds
    }

    pub fn maturity(&self) -> f64 {
        self.params.maturity
    }

    pub fn tau(&self) -> f64 {
        self.params.tau
    }

    /// Remaining life of the options at the risk horizon, `T - τ`.
    pub fn horizon(&self) -> f64 {
        self.params.maturity - self.params.tau
    }

    /// Log-price covariance per year, `ΣΣᵀ`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Per-asset volatilities, the row norms of `Σ`.
    pub fn vols(&self) -> &[f64] {
        &self.vols
    }

    /// Portfolio value at time 0.
    pub fn v0(&self) -> f64 {
        self.v0
    }
}
