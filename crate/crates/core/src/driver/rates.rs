use super::stats::LevelSummary;

/// A fitted exponent with its least-squares standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    /// `NaN` when the fit has no residual degrees of freedom.
    pub stderr: f64,
}

/// Ordinary least squares `y = a + b·x`; returns `(b, a, se(b))`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some((slope, intercept, se))
}

/// Fits `log2 value` against `log2 m`, dropping non-positive values.
/// Returns the slope.
pub fn log2_slope(points: impl IntoIterator<Item = (f64, f64)>) -> Option<Rate> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .into_iter()
        .filter(|(x, v)| *x > 0.0 && *v > 0.0 && v.is_finite())
        .map(|(x, v)| (x.log2(), v.log2()))
        .unzip();
    linear_fit(&xs, &ys).map(|(value, _, stderr)| Rate { value, stderr })
}

/// Weak, strong and cost rates per doubling of the inner sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimates {
    /// `|E Y_ℓ| ∝ m_ℓ^{-α}`
    pub alpha: Option<Rate>,
    /// `Var Y_ℓ ∝ m_ℓ^{-β}`
    pub beta: Option<Rate>,
    /// `cost_ℓ ∝ m_ℓ^{γ}`
    pub gamma: Option<Rate>,
}

/// Regresses over levels `ℓ ≥ 1` of `summaries`; `inner_samples[ℓ] = m_ℓ`.
pub fn estimate_rates(summaries: &[LevelSummary], inner_samples: &[usize]) -> RateEstimates {
    let window = || {
        summaries
            .iter()
            .filter(|s| s.level >= 1 && s.level < inner_samples.len())
            .map(|s| (inner_samples[s.level] as f64, s))
    };
    let negate = |r: Rate| Rate {
        value: -r.value,
        stderr: r.stderr,
    };
    RateEstimates {
        alpha: log2_slope(window().map(|(m, s)| (m, s.mean.abs()))).map(negate),
        beta: log2_slope(window().map(|(m, s)| (m, s.variance))).map(negate),
        gamma: log2_slope(window().map(|(m, s)| (m, s.cost as f64 / s.n as f64))),
    }
}
