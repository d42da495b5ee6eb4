use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use crate::coupling::{CouplingConfig, SmoothingSchedule};
use crate::driver::{
    run_complexity_sweep, run_convergence_study, run_eta_study, run_mlmc, sample_scenarios, MlmcOptions,
    Rate,
};
use crate::error::{Error, Result};
use crate::market::{build_factor, calibrate_threshold, loss_probability, read_portfolio, FactorMatrix, GpcaPilot, Portfolio};

/// Floating-point cell with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), fmt_float)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(io)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Portfolio, threshold and the configured couplings with their factors.
struct Setup {
    portfolio: Portfolio,
    threshold: f64,
    couplings: Vec<(CouplingConfig, FactorMatrix)>,
}

fn setup(config: &ExperimentConfig, need_couplings: bool) -> Result<Setup> {
    let portfolio = read_portfolio(&config.portfolio_file)?;
    let threshold = match config.threshold {
        Some(c) => c,
        None => calibrate_threshold(&portfolio, config.target_probability)?,
    };
    if need_couplings && config.couplings.is_empty() {
        return Err(Error::config("no couplings configured"));
    }
    let d = portfolio.dimension();
    let pilot = GpcaPilot {
        scenarios: config.gpca_pilot_scenarios,
        points: config.gpca_pilot_points,
    };
    let couplings = config
        .couplings
        .iter()
        .map(|spec| {
            let smoothing = if spec.kind.is_smoothed() {
                let r = config.r.unwrap_or(SmoothingSchedule::for_dimension(d).r());
                Some(SmoothingSchedule::new(config.k0, r)?)
            } else {
                None
            };
            let coupling = CouplingConfig {
                kind: spec.kind,
                sampling: spec.sampling,
                factor: spec.factor,
                threshold,
                schedule: config.schedule,
                smoothing,
            };
            let factor = build_factor(&portfolio, spec.factor, pilot, config.seed)?;
            Ok((coupling, factor))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Setup {
        portfolio,
        threshold,
        couplings,
    })
}

fn reference(config: &ExperimentConfig, s: &Setup) -> Option<f64> {
    config.reference.or_else(|| {
        (s.portfolio.dimension() == 1)
            .then(|| loss_probability(&s.portfolio, s.threshold).ok())
            .flatten()
    })
}

fn options(config: &ExperimentConfig) -> MlmcOptions {
    MlmcOptions {
        warmup: config.warmup,
        max_levels: config.max_levels,
        ..MlmcOptions::default()
    }
}

/// Prints the threshold, `V0` and, for one asset, the exact loss probability.
pub fn cmd_calibrate(config: &ExperimentConfig, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let s = setup(config, false)?;
    let io = |source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    writeln!(out, "threshold = {}", fmt_float(s.threshold)).map_err(io)?;
    writeln!(out, "v0 = {}", fmt_float(s.portfolio.v0())).map_err(io)?;
    if s.portfolio.dimension() == 1 {
        let theta = loss_probability(&s.portfolio, s.threshold)?;
        writeln!(out, "theta = {}", fmt_float(theta)).map_err(io)?;
    }
    Ok(Vec::new())
}

/// One per-level CSV per coupling plus `rates.csv`.
pub fn cmd_convergence(config: &ExperimentConfig, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let s = setup(config, true)?;
    ensure_dir(&config.out)?;
    let mut written = Vec::new();
    let mut rate_rows = Vec::new();
    for (coupling, factor) in &s.couplings {
        let study = run_convergence_study(&s.portfolio, factor, coupling, config.l_max, config.n_per_level, config.seed)?;
        let rows: Vec<Vec<String>> = study
            .summaries
            .iter()
            .map(|l| {
                vec![
                    l.level.to_string(),
                    study.inner_samples[l.level].to_string(),
                    fmt_float(l.mean.abs()),
                    fmt_float(l.variance),
                    fmt_opt(l.kurtosis),
                    fmt_opt(l.kvf),
                    fmt_float(l.cost as f64 / l.n as f64),
                    l.n.to_string(),
                ]
            })
            .collect();
        let path = config.out.join(format!("convergence_{}.csv", coupling.label()));
        write_csv(
            &path,
            &["level", "m_ell", "abs_mean", "variance", "kurtosis", "kvf", "cost", "n_samples"],
            &rows,
        )?;
        written.push(path);
        let cell = |r: Option<Rate>| [fmt_opt(r.map(|r| r.value)), fmt_opt(r.map(|r| r.stderr))];
        let mut row = vec![coupling.label()];
        row.extend(cell(study.rates.alpha));
        row.extend(cell(study.rates.beta));
        row.extend(cell(study.rates.gamma));
        rate_rows.push(row);
    }
    let path = config.out.join("rates.csv");
    write_csv(
        &path,
        &["coupling", "alpha", "alpha_se", "beta", "beta_se", "gamma", "gamma_se"],
        &rate_rows,
    )?;
    written.push(path);
    report_written(out, &written)?;
    Ok(written)
}

/// One MLMC run per coupling and tolerance.
pub fn cmd_estimate(config: &ExperimentConfig, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let s = setup(config, true)?;
    ensure_dir(&config.out)?;
    let mut written = Vec::new();
    for (coupling, factor) in &s.couplings {
        let mut rows = Vec::new();
        for &eps in &config.epsilons {
            let r = run_mlmc(&s.portfolio, factor, coupling, eps, config.seed, &options(config))?;
            rows.push(vec![
                fmt_float(r.estimate),
                fmt_float(r.stderr()),
                r.finest_level.to_string(),
                r.total_cost.to_string(),
            ]);
        }
        let path = config.out.join(format!("estimate_{}.csv", coupling.label()));
        write_csv(&path, &["theta_hat", "stderr", "levels", "cost"], &rows)?;
        written.push(path);
    }
    report_written(out, &written)?;
    Ok(written)
}

/// Repeated MLMC runs over the tolerance list, `complexity.csv`.
pub fn cmd_complexity(config: &ExperimentConfig, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let s = setup(config, true)?;
    ensure_dir(&config.out)?;
    let reference = reference(config, &s).unwrap_or(f64::NAN);
    let cells = run_complexity_sweep(
        &s.portfolio,
        &s.couplings,
        &config.epsilons,
        config.repeats,
        config.seed,
        reference,
        &options(config),
    )?;
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                fmt_float(c.epsilon),
                c.coupling.clone(),
                fmt_float(c.mean_cost),
                fmt_float(c.rmse),
                fmt_float(c.eps2_cost),
            ]
        })
        .collect();
    let path = config.out.join("complexity.csv");
    write_csv(&path, &["eps", "coupling", "mean_cost", "rmse", "eps2_cost"], &rows)?;
    report_written(out, std::slice::from_ref(&path))?;
    Ok(vec![path])
}

/// Inner-variance decay per scenario for every configured inner sampling.
pub fn cmd_eta(config: &ExperimentConfig, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let s = setup(config, true)?;
    ensure_dir(&config.out)?;
    let scenarios = sample_scenarios(&s.portfolio, config.eta_scenarios, config.seed)?;
    let grid = config.eta_grid();
    let mut written = Vec::new();
    let mut seen = Vec::new();
    for (coupling, factor) in &s.couplings {
        let key = (coupling.sampling, coupling.factor);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let study = run_eta_study(
            &s.portfolio,
            factor,
            coupling.sampling,
            &scenarios,
            &grid,
            config.eta_replicates,
            config.seed,
        )?;
        let mut rows: Vec<Vec<String>> = study
            .per_scenario
            .iter()
            .enumerate()
            .map(|(i, r)| vec![i.to_string(), fmt_opt(r.map(|r| r.value)), fmt_opt(r.map(|r| r.stderr))])
            .collect();
        rows.push(vec![
            "pooled".to_string(),
            fmt_opt(study.pooled.map(|r| r.value)),
            fmt_opt(study.pooled.map(|r| r.stderr)),
        ]);
        let path = config
            .out
            .join(format!("eta_{}-{}.csv", coupling.sampling, coupling.factor));
        write_csv(&path, &["scenario_id", "eta_hat", "stderr"], &rows)?;
        written.push(path);
    }
    report_written(out, &written)?;
    Ok(written)
}

fn report_written(out: &mut dyn Write, paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        writeln!(out, "wrote {}", p.display()).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })?;
    }
    Ok(())
}
