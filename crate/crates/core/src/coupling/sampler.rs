use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{CouplingConfig, InnerSampling, LevelDraw};
use crate::error::{Error, Result};
use crate::lds::{derive_key, gaussian_from_digits, BlockGenerator, DigitalSequenceSpec, ScrambleKey};
use crate::market::{sample_scenario, FactorMatrix, InnerIntegrand, Portfolio, Scenario};

const OUTER_STREAM: u64 = 0x006f_7574_6572;
const INNER_STREAM: u64 = 0x0069_6e6e_6572;

/// Source of the inner uniforms for one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStream {
    /// A fresh scramble of the Sobol' points `0..m_ℓ`.
    Rqmc(ScrambleKey),
    /// ChaCha8 seeded with this value; uniforms on the same `2^-32` grid.
    Mc(u64),
}

impl InnerStream {
    /// Stream of draw `index` at `level`: a pure function of its arguments.
    pub fn for_draw(sampling: InnerSampling, seed: u64, level: usize, index: u64) -> Self {
        let replicate = derive_key(&[level as u64, index]);
        match sampling {
            InnerSampling::Rqmc => InnerStream::Rqmc(ScrambleKey::new(seed, replicate)),
            InnerSampling::Mc => InnerStream::Mc(derive_key(&[seed, INNER_STREAM, replicate])),
        }
    }
}

/// Outer normals of draw `index` at `level`.
pub(crate) fn outer_normals(seed: u64, level: usize, index: u64, z: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_key(&[seed, OUTER_STREAM, level as u64, index]));
    for zj in z.iter_mut() {
        *zj = StandardNormal.sample(&mut rng);
    }
}

/// Reusable workspace for level draws of one coupling.
///
/// Draw `index` at `level` under `seed` is a pure function of those three
/// numbers, so workers can share out indices in any order.
#[derive(Debug, Clone)]
pub struct LevelSampler {
    portfolio: Portfolio,
    config: CouplingConfig,
    integrand: InnerIntegrand,
    spec: Option<DigitalSequenceSpec>,
    generators: Vec<Option<BlockGenerator>>,
    raw: Vec<u32>,
    psi: Vec<f64>,
    bases: Vec<f64>,
    z: Vec<f64>,
}

impl LevelSampler {
    pub fn new(p: &Portfolio, a: &FactorMatrix, config: &CouplingConfig) -> Result<Self> {
        config.validate()?;
        let d = p.dimension();
        let spec = match config.sampling {
            InnerSampling::Rqmc => Some(DigitalSequenceSpec::sobol(d)?),
            InnerSampling::Mc => None,
        };
        Ok(Self {
            portfolio: p.clone(),
            config: *config,
            integrand: InnerIntegrand::new(p, a)?,
            spec,
            generators: Vec::new(),
            raw: Vec::new(),
            psi: Vec::new(),
            bases: vec![0.0; d],
            z: vec![0.0; d],
        })
    }

    pub fn config(&self) -> &CouplingConfig {
        &self.config
    }

    /// Outer scenario of draw `index` at `level`.
    pub fn scenario(&mut self, seed: u64, level: usize, index: u64) -> Result<Scenario> {
        outer_normals(seed, level, index, &mut self.z);
        sample_scenario(&self.portfolio, &self.z)
    }

    /// Draw `index` of `level`: samples the scenario and the inner points
    /// from counter-based streams.
    pub fn sample(&mut self, level: usize, seed: u64, index: u64) -> Result<LevelDraw> {
        let omega = self.scenario(seed, level, index)?;
        let stream = InnerStream::for_draw(self.config.sampling, seed, level, index);
        self.draw_for(level, &omega, stream)
    }

    /// Level draw for a given scenario and inner stream.
    pub fn draw_for(&mut self, level: usize, omega: &Scenario, stream: InnerStream) -> Result<LevelDraw> {
        let m = self.config.schedule.inner_samples(level)?;
        self.inner_payoffs(omega, m, stream)?;
        let config = &self.config;
        if level == 0 {
            let g = self.psi.iter().sum::<f64>() / m as f64;
            let fine = config.functional(0, g);
            return Ok(LevelDraw {
                y: fine,
                cost: m as u64,
                fine,
                coarse: 0.0,
                halves: [0.0; 2],
            });
        }
        let half = m / 2;
        let first: f64 = self.psi[..half].iter().sum();
        let second: f64 = self.psi[half..].iter().sum();
        let fine = config.functional(level, (first + second) / m as f64);
        let halves = [
            config.functional(level - 1, first / half as f64),
            config.functional(level - 1, second / half as f64),
        ];
        let coarse = if config.kind.is_antithetic() {
            0.5 * (halves[0] + halves[1])
        } else {
            halves[0]
        };
        Ok(LevelDraw {
            y: fine - coarse,
            cost: m as u64,
            fine,
            coarse,
            halves,
        })
    }

    /// Inner mean over the first `m` inner points of `stream`.
    pub fn inner_mean(&mut self, omega: &Scenario, m: usize, stream: InnerStream) -> Result<f64> {
        self.inner_payoffs(omega, m, stream)?;
        Ok(self.psi.iter().sum::<f64>() / m as f64)
    }

    fn inner_payoffs(&mut self, omega: &Scenario, m: usize, stream: InnerStream) -> Result<()> {
        let d = self.integrand.dimension();
        if omega.dimension() != d {
            return Err(Error::config("scenario dimension does not match the portfolio"));
        }
        self.raw.resize(m * d, 0);
        match stream {
            InnerStream::Rqmc(key) => {
                let spec = self
                    .spec
                    .as_ref()
                    .ok_or_else(|| Error::config("scrambled points requested from an MC sampler"))?;
                if !m.is_power_of_two() {
                    return Err(Error::config(format!("RQMC needs a power-of-two sample size, got {m}")));
                }
                let k = m.trailing_zeros() as usize;
                if self.generators.len() <= k {
                    self.generators.resize(k + 1, None);
                }
                let generator = match &mut self.generators[k] {
                    Some(g) => g,
                    slot => slot.insert(BlockGenerator::new(spec, m)?),
                };
                generator.fill(Some(key), &mut self.raw);
            }
            InnerStream::Mc(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for x in self.raw.iter_mut() {
                    *x = rng.next_u32();
                }
            }
        }
        self.integrand.bases(omega, &mut self.bases);
        self.psi.clear();
        let mut z = std::mem::take(&mut self.z);
        for row in self.raw.chunks_exact(d) {
            for (zj, &x) in z.iter_mut().zip(row) {
                *zj = gaussian_from_digits(x);
            }
            self.psi.push(self.integrand.value(&self.bases, &z));
        }
        self.z = z;
        Ok(())
    }
}
