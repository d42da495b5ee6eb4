//! Inner-mean estimators and multilevel couplings.
//!
//! Level `ℓ` uses `m_ℓ = m0·2^ℓ` inner points. A level-`ℓ` draw evaluates
//! the fine functional on all `m_ℓ` points and the coarse functional on the
//! halves of the same block, so consecutive levels share their inner samples.

mod sampler;

pub use sampler::{InnerStream, LevelSampler};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lds::PointBlock;
use crate::market::{FactorKind, FactorMatrix, InnerIntegrand, Portfolio, Scenario};

/// Beyond this steepness the sigmoid is replaced by the indicator.
pub const MAX_STEEPNESS: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingKind {
    /// `I(ĝ_fine > c) - I(ĝ_first_half > c)`
    Crude,
    /// Coarse term averaged over both halves of the fine block.
    Antithetic,
    /// Crude with the indicator replaced by a level-dependent sigmoid.
    Smoothed,
    SmoothedAntithetic,
}

impl CouplingKind {
    pub const ALL: [CouplingKind; 4] = [
        CouplingKind::Crude,
        CouplingKind::Antithetic,
        CouplingKind::Smoothed,
        CouplingKind::SmoothedAntithetic,
    ];

    pub fn is_smoothed(self) -> bool {
        matches!(self, CouplingKind::Smoothed | CouplingKind::SmoothedAntithetic)
    }

    pub fn is_antithetic(self) -> bool {
        matches!(self, CouplingKind::Antithetic | CouplingKind::SmoothedAntithetic)
    }
}

impl FromStr for CouplingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "crude" => Ok(CouplingKind::Crude),
            "antithetic" => Ok(CouplingKind::Antithetic),
            "smoothed" => Ok(CouplingKind::Smoothed),
            "smoothed_antithetic" => Ok(CouplingKind::SmoothedAntithetic),
            other => Err(Error::config(format!("unknown coupling kind '{other}'"))),
        }
    }
}

impl fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingKind::Crude => "crude",
            CouplingKind::Antithetic => "antithetic",
            CouplingKind::Smoothed => "smoothed",
            CouplingKind::SmoothedAntithetic => "smoothed_antithetic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerSampling {
    /// Pseudo-random inner uniforms.
    Mc,
    /// Owen-scrambled Sobol' points.
    Rqmc,
}

impl FromStr for InnerSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mc" => Ok(InnerSampling::Mc),
            "rqmc" => Ok(InnerSampling::Rqmc),
            other => Err(Error::config(format!("unknown inner sampling '{other}'"))),
        }
    }
}

impl fmt::Display for InnerSampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InnerSampling::Mc => "mc",
            InnerSampling::Rqmc => "rqmc",
        })
    }
}

/// Inner sample sizes `m_ℓ = m0·2^ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSchedule {
    m0: usize,
}

impl LevelSchedule {
    pub fn new(m0: usize) -> Result<Self> {
        if !m0.is_power_of_two() {
            return Err(Error::config(format!("m0 = {m0} must be a power of two")));
        }
        Ok(Self { m0 })
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    /// `m_ℓ`; levels are limited so that `m_ℓ ≤ 2^31`.
    pub fn inner_samples(&self, level: usize) -> Result<usize> {
        let shift = u32::try_from(level).ok().filter(|&s| s < 32);
        shift
            .and_then(|s| self.m0.checked_shl(s))
            .filter(|&m| m <= 1 << 31)
            .ok_or_else(|| Error::config(format!("level {level} exceeds the available inner points")))
    }
}

impl Default for LevelSchedule {
    fn default() -> Self {
        Self { m0: 32 }
    }
}

/// Sigmoid steepness `k0·r^ℓ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingSchedule {
    k0: f64,
    r: f64,
}

impl SmoothingSchedule {
    pub fn new(k0: f64, r: f64) -> Result<Self> {
        if !(k0 > 0.0 && k0.is_finite()) {
            return Err(Error::domain("k0", k0, "k0 > 0"));
        }
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::domain("r", r, "r > 1"));
        }
        Ok(Self { k0, r })
    }

    /// `k0 = 8`, with `r = 2` for one asset and `r = √2` otherwise.
    pub fn for_dimension(d: usize) -> Self {
        Self {
            k0: 8.0,
            r: if d <= 1 { 2.0 } else { std::f64::consts::SQRT_2 },
        }
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn steepness(&self, level: usize) -> f64 {
        self.k0 * self.r.powi(level.min(i32::MAX as usize) as i32)
    }
}

/// `1 / (1 + e^{-kx})`, evaluated without overflow. Steepness above
/// [`MAX_STEEPNESS`] gives the indicator of `x > 0` (and ½ at 0).
#[inline]
pub fn sigmoid(x: f64, k: f64) -> f64 {
    if k > MAX_STEEPNESS {
        return if x > 0.0 {
            1.0
        } else if x < 0.0 {
            0.0
        } else {
            0.5
        };
    }
    let t = k * x;
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Everything that selects a level estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConfig {
    pub kind: CouplingKind,
    pub sampling: InnerSampling,
    pub factor: FactorKind,
    pub threshold: f64,
    pub schedule: LevelSchedule,
    /// Required by the smoothed kinds.
    pub smoothing: Option<SmoothingSchedule>,
}

impl CouplingConfig {
    /// Cholesky factor, default schedules for `d` assets.
    pub fn new(kind: CouplingKind, sampling: InnerSampling, threshold: f64, d: usize) -> Self {
        Self {
            kind,
            sampling,
            factor: FactorKind::Cholesky,
            threshold,
            schedule: LevelSchedule::default(),
            smoothing: kind.is_smoothed().then(|| SmoothingSchedule::for_dimension(d)),
        }
    }

    pub fn with_factor(mut self, factor: FactorKind) -> Self {
        self.factor = factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::domain("threshold", self.threshold, "finite"));
        }
        if self.kind.is_smoothed() && self.smoothing.is_none() {
            return Err(Error::config(format!(
                "coupling '{}' needs a smoothing schedule",
                self.kind
            )));
        }
        Ok(())
    }

    /// Short label such as `smoothed-rqmc-gpca`.
    pub fn label(&self) -> String {
        format!("{}-{}-{}", self.kind, self.sampling, self.factor)
    }

    /// Level-`ℓ` functional of an inner mean.
    #[inline]
    pub fn functional(&self, level: usize, g: f64) -> f64 {
        match (self.kind.is_smoothed(), &self.smoothing) {
            (true, Some(s)) => sigmoid(g - self.threshold, s.steepness(level)),
            _ => {
                if g > self.threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One sample of the level difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDraw {
    pub y: f64,
    /// Inner payoff evaluations spent.
    pub cost: u64,
    /// Fine functional `F_ℓ(ĝ_{m_ℓ})`.
    pub fine: f64,
    /// Coarse functional subtracted from `fine` (0 at level 0).
    pub coarse: f64,
    /// `F_{ℓ-1}` on the first and second half of the block (level ≥ 1).
    pub halves: [f64; 2],
}

/// Arithmetic mean of the inner payoff over `points`.
pub fn inner_mean(p: &Portfolio, a: &FactorMatrix, omega: &Scenario, points: &PointBlock) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::config("inner mean needs at least one point"));
    }
    if points.dimension() != p.dimension() {
        return Err(Error::config("point dimension does not match the portfolio"));
    }
    let f = InnerIntegrand::new(p, a)?;
    let mut bases = vec![0.0; p.dimension()];
    f.bases(omega, &mut bases);
    let mut z = vec![0.0; p.dimension()];
    let mut sum = 0.0;
    for u in points.points() {
        for (zj, &uj) in z.iter_mut().zip(u) {
            *zj = crate::lds::gaussian_from_unit(uj);
        }
        sum += f.value(&bases, &z);
    }
    Ok(sum / points.len() as f64)
}

/// One level-`level` draw for the scenario `omega`, with inner points from
/// `stream`.
pub fn sample_level(
    config: &CouplingConfig,
    level: usize,
    p: &Portfolio,
    a: &FactorMatrix,
    omega: &Scenario,
    stream: InnerStream,
) -> Result<LevelDraw> {
    let mut sampler = LevelSampler::new(p, a, config)?;
    sampler.draw_for(level, omega, stream)
}
