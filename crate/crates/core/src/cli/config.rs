//! Experiment configuration files.
//!
//! Flat `key = value` lines with `portfolio.`, `coupling.` and `run.`
//! prefixes; `#` starts a comment. Unknown or repeated keys are rejected.
//!
//! ```text
//! portfolio.file = put.portfolio
//! portfolio.target_probability = 0.3
//! coupling.list = crude:mc, crude:rqmc, smoothed:rqmc
//! run.seed = 7
//! run.epsilon = 0.04, 0.02, 0.01
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::coupling::{CouplingKind, InnerSampling, LevelSchedule, SmoothingSchedule};
use crate::error::{Error, Result};
use crate::market::FactorKind;

const KEYS: &[&str] = &[
    "portfolio.file",
    "portfolio.target_probability",
    "portfolio.threshold",
    "coupling.list",
    "coupling.m0",
    "coupling.k0",
    "coupling.r",
    "run.seed",
    "run.out",
    "run.epsilon",
    "run.l_max",
    "run.n_per_level",
    "run.repeats",
    "run.warmup",
    "run.max_levels",
    "run.reference",
    "run.eta_scenarios",
    "run.eta_replicates",
    "run.eta_m_min",
    "run.eta_m_max",
    "run.gpca_pilot_scenarios",
    "run.gpca_pilot_points",
];

/// One entry of `coupling.list`: `kind:sampling[:factor]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    pub sampling: InnerSampling,
    pub factor: FactorKind,
}

impl CouplingSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        match parts.as_slice() {
            [kind, sampling] => Ok(Self {
                kind: kind.parse()?,
                sampling: sampling.parse()?,
                factor: FactorKind::Cholesky,
            }),
            [kind, sampling, factor] => Ok(Self {
                kind: kind.parse()?,
                sampling: sampling.parse()?,
                factor: factor.parse()?,
            }),
            _ => Err(Error::config(format!(
                "coupling '{text}' must look like kind:sampling[:factor]"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub portfolio_file: PathBuf,
    /// Loss probability used to calibrate a single-asset threshold.
    pub target_probability: f64,
    /// Explicit threshold; overrides calibration.
    pub threshold: Option<f64>,
    pub couplings: Vec<CouplingSpec>,
    pub schedule: LevelSchedule,
    pub k0: f64,
    /// Steepness growth; defaults by portfolio dimension when absent.
    pub r: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub epsilons: Vec<f64>,
    pub l_max: usize,
    pub n_per_level: u64,
    pub repeats: usize,
    /// Fixed warm-up draws per level; scaled with the tolerance when absent.
    pub warmup: Option<u64>,
    pub max_levels: usize,
    /// Reference probability for error columns.
    pub reference: Option<f64>,
    pub eta_scenarios: usize,
    pub eta_replicates: u64,
    pub eta_m_min: usize,
    pub eta_m_max: usize,
    pub gpca_pilot_scenarios: usize,
    pub gpca_pilot_points: usize,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses configuration text; relative paths are resolved against `base`.
    pub fn parse(text: &str, origin: &Path, base: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut values: BTreeMap<&str, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected key = value, got '{content}'")))?;
            let key = key.trim();
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(err(line, format!("unknown key '{key}'")));
            };
            if values.insert(known, (line, value.trim().to_string())).is_some() {
                return Err(err(line, format!("duplicate key '{key}'")));
            }
        }

        let field = |key: &str| values.get(key);
        fn parsed<T: std::str::FromStr>(
            entry: Option<&(usize, String)>,
            key: &str,
            default: T,
            err: &dyn Fn(usize, String) -> Error,
        ) -> Result<T> {
            match entry {
                None => Ok(default),
                Some((line, v)) => v
                    .parse()
                    .map_err(|_| err(*line, format!("invalid value '{v}' for '{key}'"))),
            }
        }
        let list = |key: &str| -> Option<(usize, Vec<String>)> {
            field(key).map(|(line, v)| {
                (
                    *line,
                    v.split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect(),
                )
            })
        };

        let portfolio_file = match field("portfolio.file") {
            Some((_, v)) => base.join(v),
            None => return Err(Error::Config(format!("{}: missing key 'portfolio.file'", origin.display()))),
        };
        if !portfolio_file.is_file() {
            return Err(Error::Config(format!(
                "portfolio file {} does not exist",
                portfolio_file.display()
            )));
        }

        let couplings = match list("coupling.list") {
            Some((line, items)) => items
                .iter()
                .map(|s| CouplingSpec::parse(s).map_err(|e| err(line, e.to_string())))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };

        let epsilons = match list("run.epsilon") {
            Some((line, items)) => items
                .iter()
                .map(|s| match s.parse::<f64>() {
                    Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                    _ => Err(err(line, format!("epsilon '{s}' must be a positive number"))),
                })
                .collect::<Result<Vec<_>>>()?,
            None => vec![0.01],
        };
        if epsilons.is_empty() {
            return Err(Error::config("run.epsilon lists no tolerances"));
        }

        let m0_entry = field("coupling.m0");
        let m0: usize = parsed(m0_entry, "coupling.m0", 32, &err)?;
        let schedule = LevelSchedule::new(m0)
            .map_err(|e| err(m0_entry.map_or(0, |(l, _)| *l), e.to_string()))?;
        let k0: f64 = parsed(field("coupling.k0"), "coupling.k0", 8.0, &err)?;
        let r: Option<f64> = match field("coupling.r") {
            None => None,
            entry => Some(parsed(entry, "coupling.r", 0.0, &err)?),
        };
        SmoothingSchedule::new(k0, r.unwrap_or(2.0))?;

        let target_probability = parsed(field("portfolio.target_probability"), "portfolio.target_probability", 0.3, &err)?;
        if !(target_probability > 0.0 && target_probability < 1.0) {
            return Err(Error::domain("portfolio.target_probability", target_probability, "0 < p < 1"));
        }
        let threshold = match field("portfolio.threshold") {
            None => None,
            entry => Some(parsed(entry, "portfolio.threshold", 0.0, &err)?),
        };
        let warmup = match field("run.warmup") {
            None => None,
            entry => Some(parsed(entry, "run.warmup", 0, &err)?),
        };
        let reference = match field("run.reference") {
            None => None,
            entry => Some(parsed(entry, "run.reference", 0.0, &err)?),
        };

        let config = Self {
            portfolio_file,
            target_probability,
            threshold,
            couplings,
            schedule,
            k0,
            r,
            seed: parsed(field("run.seed"), "run.seed", 1, &err)?,
            out: field("run.out").map_or_else(|| base.join("results"), |(_, v)| base.join(v)),
            epsilons,
            l_max: parsed(field("run.l_max"), "run.l_max", 7, &err)?,
            n_per_level: parsed(field("run.n_per_level"), "run.n_per_level", 100_000, &err)?,
            repeats: parsed(field("run.repeats"), "run.repeats", 3, &err)?,
            warmup,
            max_levels: parsed(field("run.max_levels"), "run.max_levels", 14, &err)?,
            reference,
            eta_scenarios: parsed(field("run.eta_scenarios"), "run.eta_scenarios", 16, &err)?,
            eta_replicates: parsed(field("run.eta_replicates"), "run.eta_replicates", 64, &err)?,
            eta_m_min: parsed(field("run.eta_m_min"), "run.eta_m_min", 32, &err)?,
            eta_m_max: parsed(field("run.eta_m_max"), "run.eta_m_max", 4096, &err)?,
            gpca_pilot_scenarios: parsed(field("run.gpca_pilot_scenarios"), "run.gpca_pilot_scenarios", 64, &err)?,
            gpca_pilot_points: parsed(field("run.gpca_pilot_points"), "run.gpca_pilot_points", 64, &err)?,
        };
        if !config.eta_m_min.is_power_of_two()
            || !config.eta_m_max.is_power_of_two()
            || config.eta_m_max <= config.eta_m_min
        {
            return Err(Error::config("run.eta_m_min < run.eta_m_max must both be powers of two"));
        }
        if !config.gpca_pilot_points.is_power_of_two() || config.gpca_pilot_scenarios == 0 {
            return Err(Error::config("GPCA pilot needs scenarios and a power-of-two point count"));
        }
        Ok(config)
    }

    /// Inner sample sizes of the η study, `eta_m_min, 2·eta_m_min, ..., eta_m_max`.
    pub fn eta_grid(&self) -> Vec<usize> {
        std::iter::successors(Some(self.eta_m_min), |m| Some(m * 2))
            .take_while(|m| *m <= self.eta_m_max)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_portfolio(text: &str) -> (tempfile::TempDir, Result<ExperimentConfig>) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("p.portfolio"), "").unwrap();
        let path = dir.path().join("exp.conf");
        std::fs::write(&path, text).unwrap();
        let r = ExperimentConfig::from_file(&path);
        (dir, r)
    }

    #[test]
    fn defaults_and_lists() {
        let (dir, c) = with_portfolio(
            "portfolio.file = p.portfolio\ncoupling.list = crude:mc, smoothed:rqmc:gpca\n\
             run.epsilon = 0.04, 0.02 # two tolerances\n",
        );
        let c = c.unwrap();
        assert_eq!(c.portfolio_file, dir.path().join("p.portfolio"));
        assert_eq!(c.couplings.len(), 2);
        assert_eq!(c.couplings[1].factor, FactorKind::Gpca);
        assert_eq!(c.epsilons, vec![0.04, 0.02]);
        assert_eq!(c.schedule.m0(), 32);
        assert_eq!(c.warmup, None);
        assert_eq!(c.eta_grid(), vec![32, 64, 128, 256, 512, 1024, 2048, 4096]);
        assert_eq!(c.out, dir.path().join("results"));
    }

    #[test]
    fn strict_parsing() {
        let (_d, c) = with_portfolio("portfolio.file = p.portfolio\nrun.sed = 3\n");
        assert!(matches!(c, Err(Error::Parse { line: 2, .. })));
        let (_d, c) = with_portfolio("portfolio.file = p.portfolio\nrun.seed = x\n");
        assert!(matches!(c, Err(Error::Parse { line: 2, .. })));
        let (_d, c) = with_portfolio("portfolio.file = p.portfolio\nrun.epsilon = 0.1, -2\n");
        assert!(c.is_err());
        let (_d, c) = with_portfolio("portfolio.file = missing.portfolio\n");
        assert!(matches!(c, Err(Error::Config(m)) if m.contains("missing.portfolio")));
        let (_d, c) = with_portfolio("portfolio.file = p.portfolio\ncoupling.list = crude\n");
        assert!(c.is_err());
        let (_d, c) = with_portfolio("portfolio.file = p.portfolio\ncoupling.m0 = 24\n");
        assert!(c.is_err());
        let (_d, c) = with_portfolio("portfolio.file = p.portfolio\nportfolio.file = p.portfolio\n");
        assert!(c.is_err());
    }
}
