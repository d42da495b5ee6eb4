use crate::error::{Error, Result};

/// Power sums of the draws at one level.
///
/// Two accumulators over disjoint batches merge by fieldwise addition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub n: u64,
    /// `Σy, Σy², Σy³, Σy⁴`
    pub sums: [f64; 4],
    /// Inner payoff evaluations.
    pub cost: u64,
}

impl LevelStats {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            n: 0,
            sums: [0.0; 4],
            cost: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, y: f64, cost: u64) {
        let y2 = y * y;
        self.n += 1;
        self.sums[0] += y;
        self.sums[1] += y2;
        self.sums[2] += y2 * y;
        self.sums[3] += y2 * y2;
        self.cost += cost;
    }

    pub fn merge(&mut self, other: &LevelStats) {
        debug_assert_eq!(self.level, other.level);
        self.n += other.n;
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            *a += b;
        }
        self.cost += other.cost;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sums[0] / self.n as f64
        }
    }

    /// Population variance `S²`.
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.sums[0] / n;
        (self.sums[1] / n - mean * mean).max(0.0)
    }

    /// Mean inner evaluations per draw.
    pub fn cost_per_draw(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.cost as f64 / self.n as f64
        }
    }
}

/// Statistics derived from a [`LevelStats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub n: u64,
    pub mean: f64,
    /// Population variance `S²`.
    pub variance: f64,
    /// `κ̂ = m4 / m2²`; `None` when the variance vanishes.
    pub kurtosis: Option<f64>,
    /// `κ̂·S²`.
    pub kvf: Option<f64>,
    /// Standard error of `S²`: `(S²/√N)·√(κ̂ - 1 + 2/(N-1))`.
    pub variance_stderr: Option<f64>,
    pub cost: u64,
}

/// Mean, variance, kurtosis and KVF of a level. Needs at least 4 draws.
pub fn level_statistics(stats: &LevelStats) -> Result<LevelSummary> {
    if stats.n < 4 {
        return Err(Error::config(format!(
            "level {} has {} draws, statistics need at least 4",
            stats.level, stats.n
        )));
    }
    let n = stats.n as f64;
    let [s1, s2, s3, s4] = stats.sums.map(|s| s / n);
    let mean = s1;
    let m2 = (s2 - mean * mean).max(0.0);
    let m4 = s4 - 4.0 * mean * s3 + 6.0 * mean * mean * s2 - 3.0 * mean.powi(4);
    let (kurtosis, kvf, variance_stderr) = if m2 > 0.0 {
        let k = m4.max(0.0) / (m2 * m2);
        let se = m2 / n.sqrt() * (k - 1.0 + 2.0 / (n - 1.0)).max(0.0).sqrt();
        (Some(k), Some(k * m2), Some(se))
    } else {
        (None, None, None)
    };
    Ok(LevelSummary {
        level: stats.level,
        n: stats.n,
        mean,
        variance: m2,
        kurtosis,
        kvf,
        variance_stderr,
        cost: stats.cost,
    })
}
