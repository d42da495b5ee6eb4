//! Covariance models and their factorizations.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::payoff::sample_scenario;
use super::{Portfolio, Scenario};
use crate::error::{Error, Result};
use crate::lds::{derive_key, gaussian_from_unit, generate_block, DigitalSequenceSpec, PointBlock, ScrambleKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovarianceKind {
    /// `C_ij = 0.3 · 0.98^|i-j|`
    Exponential,
    /// `C_ij = 0.3 · (d - |i-j|) / d`
    Triangular,
}

impl FromStr for CovarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" => Ok(CovarianceKind::Exponential),
            "triangular" => Ok(CovarianceKind::Triangular),
            other => Err(Error::config(format!("unknown covariance kind '{other}'"))),
        }
    }
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceKind::Exponential => "exponential",
            CovarianceKind::Triangular => "triangular",
        })
    }
}

pub fn build_covariance(kind: CovarianceKind, d: usize) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::config("covariance dimension must be at least 1"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let lag = i.abs_diff(j);
        match kind {
            CovarianceKind::Exponential => 0.3 * 0.98f64.powi(lag as i32),
            CovarianceKind::Triangular => 0.3 * (d - lag) as f64 / d as f64,
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FactorKind {
    #[default]
    Cholesky,
    Gpca,
}

impl FromStr for FactorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cholesky" => Ok(FactorKind::Cholesky),
            "gpca" => Ok(FactorKind::Gpca),
            other => Err(Error::config(format!("unknown factor '{other}'"))),
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorKind::Cholesky => "cholesky",
            FactorKind::Gpca => "gpca",
        })
    }
}

/// A square matrix `A` with `AAᵀ = C`, used to correlate inner normals.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    a: DMatrix<f64>,
    provenance: FactorKind,
}

impl FactorMatrix {
    /// Wraps `a` after checking `aaᵀ` against `covariance` (relative
    /// Frobenius tolerance 1e-10).
    pub fn new(a: DMatrix<f64>, provenance: FactorKind, covariance: &DMatrix<f64>) -> Result<Self> {
        let f = Self { a, provenance };
        let err = f.relative_error(covariance);
        if !(err <= 1e-10) {
            return Err(Error::config(format!(
                "factor does not reproduce the covariance (relative error {err:e})"
            )));
        }
        Ok(f)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.a
    }

    pub fn provenance(&self) -> FactorKind {
        self.provenance
    }

    pub fn dimension(&self) -> usize {
        self.a.nrows()
    }

    /// `‖AAᵀ - C‖_F / ‖C‖_F`
    pub fn relative_error(&self, covariance: &DMatrix<f64>) -> f64 {
        if covariance.shape() != self.a.shape() {
            return f64::INFINITY;
        }
        (&self.a * self.a.transpose() - covariance).norm() / covariance.norm()
    }
}

/// Lower-triangular Cholesky factor.
pub fn cholesky(c: &DMatrix<f64>) -> Result<FactorMatrix> {
    let d = c.nrows();
    if d == 0 || c.ncols() != d {
        return Err(Error::config(format!("covariance must be square, got {:?}", c.shape())));
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    for i in 0..d {
        for j in 0..i {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::config(format!("covariance is not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut l = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let mut pivot = c[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j, value: pivot });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..d {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(FactorMatrix {
        a: l,
        provenance: FactorKind::Cholesky,
    })
}

/// Gradient of the inner payoff with respect to the standard normal inputs
/// `z`, for the factor `a` and scenario `omega`.
///
/// At a payoff kink the subgradient 0 is used.
pub fn inner_gradient(p: &Portfolio, a: &FactorMatrix, omega: &Scenario, z: &[f64]) -> Vec<f64> {
    let d = p.dimension();
    let h = p.horizon();
    let sqrt_h = h.sqrt();
    let discount = (-p.mu0() * h).exp();
    let m = a.matrix();
    let mut dpsi_dx = vec![0.0; d];
    for i in 0..d {
        let x: f64 = (0..d).map(|j| m[(i, j)] * z[j]).sum();
        let vol = p.vols()[i];
        let s = omega.prices()[i] * ((p.mu0() - 0.5 * vol * vol) * h + sqrt_h * x).exp();
        let k = p.strikes()[i];
        let slope = match p.kinds()[i] {
            super::OptionKind::Call if s > k => 1.0,
            super::OptionKind::Put if s < k => -1.0,
            _ => 0.0,
        };
        dpsi_dx[i] = -discount * slope * s * sqrt_h;
    }
    (0..d)
        .map(|j| (0..d).map(|i| m[(i, j)] * dpsi_dx[i]).sum())
        .collect()
}

/// Rotation `A = L·U` where `U` holds the eigenvectors of the mean gradient
/// outer product `G = mean(g gᵀ)`, sorted by decreasing eigenvalue.
///
/// `gradients` are rows of length `d`, taken with respect to the inputs of
/// `l`. Returns the factor and the eigenvalues of `G`.
pub fn rotation_from_gradients(
    l: &FactorMatrix,
    gradients: &[f64],
) -> Result<(FactorMatrix, Vec<f64>)> {
    let d = l.dimension();
    if gradients.is_empty() || !gradients.len().is_multiple_of(d) {
        return Err(Error::config(format!(
            "{} gradient entries do not form rows of length {d}",
            gradients.len()
        )));
    }
    let n = gradients.len() / d;
    let mut g = DMatrix::<f64>::zeros(d, d);
    for row in gradients.chunks_exact(d) {
        for i in 0..d {
            for j in 0..=i {
                g[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = g[(i, j)] / n as f64;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let mut u = DMatrix::<f64>::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        // fix the sign so the largest entry is positive
        let lead = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            u[(r, col)] = sign * v[r];
        }
    }
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    Ok((
        FactorMatrix {
            a: l.matrix() * u,
            provenance: FactorKind::Gpca,
        },
        values,
    ))
}

/// Gradient-PCA rotation of `l` estimated on a pilot sample: every pilot
/// scenario is paired with every pilot point.
pub fn gpca_rotation(
    p: &Portfolio,
    l: &FactorMatrix,
    pilot_scenarios: &[Scenario],
    pilot_points: &PointBlock,
) -> Result<FactorMatrix> {
    let d = p.dimension();
    if l.dimension() != d || pilot_points.dimension() != d {
        return Err(Error::config("pilot points and factor must match the portfolio dimension"));
    }
    if pilot_scenarios.is_empty() || pilot_points.is_empty() {
        return Err(Error::config("GPCA needs a non-empty pilot sample"));
    }
    let mut grads = Vec::with_capacity(pilot_scenarios.len() * pilot_points.len() * d);
    let mut z = vec![0.0; d];
    for omega in pilot_scenarios {
        for u in pilot_points.points() {
            for (zj, &uj) in z.iter_mut().zip(u) {
                *zj = gaussian_from_unit(uj);
            }
            grads.extend(inner_gradient(p, l, omega, &z));
        }
    }
    let (a, _) = rotation_from_gradients(l, &grads)?;
    FactorMatrix::new(a.a, FactorKind::Gpca, p.covariance())
}

/// Pilot sample size for the GPCA rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GpcaPilot {
    pub scenarios: usize,
    /// Scrambled inner points per scenario; a power of two.
    pub points: usize,
}

impl Default for GpcaPilot {
    fn default() -> Self {
        Self {
            scenarios: 64,
            points: 64,
        }
    }
}

const PILOT_STREAM: u64 = 0x0070_696c_6f74;

/// Factor of the portfolio covariance of the requested kind. GPCA pilot
/// randomness is drawn from `seed`.
pub fn build_factor(p: &Portfolio, kind: FactorKind, pilot: GpcaPilot, seed: u64) -> Result<FactorMatrix> {
    let l = cholesky(p.covariance())?;
    if kind == FactorKind::Cholesky {
        return Ok(l);
    }
    let d = p.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_key(&[seed, PILOT_STREAM]));
    let mut z = vec![0.0; d];
    let scenarios = (0..pilot.scenarios)
        .map(|_| {
            for zj in z.iter_mut() {
                *zj = StandardNormal.sample(&mut rng);
            }
            sample_scenario(p, &z)
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = DigitalSequenceSpec::sobol(d)?;
    let points = generate_block(&spec, 0, pilot.points, Some(ScrambleKey::new(seed, PILOT_STREAM)))?;
    gpca_rotation(p, &l, &scenarios, &points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::payoff::InnerIntegrand;

    #[test]
    fn covariance_entries() {
        let e = build_covariance(CovarianceKind::Exponential, 2).unwrap();
        assert!((e[(0, 1)] - 0.294).abs() < 1e-15);
        let t = build_covariance(CovarianceKind::Triangular, 4).unwrap();
        assert!((t[(0, 3)] - 0.075).abs() < 1e-15);
        for kind in [CovarianceKind::Exponential, CovarianceKind::Triangular] {
            let c = build_covariance(kind, 7).unwrap();
            assert_eq!(c, c.transpose());
            assert!(c.diagonal().iter().all(|&x| x == 0.3));
        }
        assert!(build_covariance(CovarianceKind::Triangular, 0).is_err());
    }

    #[test]
    fn cholesky_closed_forms() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(cholesky(&id).unwrap().into_matrix(), id);
        let rho = 0.6;
        let c = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let l = cholesky(&c).unwrap().into_matrix();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, rho, (1.0f64 - rho * rho).sqrt()]);
        assert!((l - expected).amax() < 1e-15);
        let c = build_covariance(CovarianceKind::Exponential, 4).unwrap();
        let l = cholesky(&c).unwrap();
        assert!((l.matrix() * l.matrix().transpose() - &c).norm() < 1e-12);
    }

    #[test]
    fn cholesky_names_the_failing_pivot() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        match cholesky(&c) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(cholesky(&asym).is_err());
    }

    #[test]
    fn linear_integrand_gives_rank_one_rotation() {
        let c = build_covariance(CovarianceKind::Exponential, 5).unwrap();
        let l = cholesky(&c).unwrap();
        // gradient of z -> b·(Lz) is Lᵀb at every z
        let b = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0]);
        let grad = l.matrix().transpose() * &b;
        let rows: Vec<f64> = (0..10).flat_map(|_| grad.iter().copied()).collect();
        let (a, values) = rotation_from_gradients(&l, &rows).unwrap();
        let u = l.matrix().clone().try_inverse().unwrap() * a.matrix();
        let u1 = u.column(0);
        let cos = u1.dot(&grad) / grad.norm();
        assert!((cos.abs() - 1.0).abs() < 1e-12);
        assert!((values[0] - grad.norm_squared()).abs() < 1e-10 * values[0]);
        assert!(values[1..].iter().all(|v| v.abs() < 1e-10 * values[0]));
        assert!(a.relative_error(&c) < 1e-12);
    }

    #[test]
    fn gpca_preserves_covariance() {
        let p = Portfolio::call_basket(16, CovarianceKind::Exponential).unwrap();
        let a = build_factor(&p, FactorKind::Gpca, GpcaPilot::default(), 3).unwrap();
        assert_eq!(a.provenance(), FactorKind::Gpca);
        assert!((a.matrix() * a.matrix().transpose() - p.covariance()).norm() < 1e-8);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = Portfolio::call_basket(6, CovarianceKind::Triangular).unwrap();
        let l = cholesky(p.covariance()).unwrap();
        let f = InnerIntegrand::new(&p, &l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut bases = vec![0.0; 6];
        let mut checked = 0;
        for _ in 0..200 {
            let zo: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            let omega = sample_scenario(&p, &zo).unwrap();
            let z: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            f.bases(&omega, &mut bases);
            // skip points close to a kink
            let s_t = f.terminal_prices(&bases, &z);
            if s_t.iter().zip(p.strikes()).any(|(s, k)| (s / k - 1.0).abs() < 1e-4) {
                continue;
            }
            let g = inner_gradient(&p, &l, &omega, &z);
            let step = 1e-5;
            for j in 0..6 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[j] += step;
                zm[j] -= step;
                let fd = (f.value(&bases, &zp) - f.value(&bases, &zm)) / (2.0 * step);
                let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-8);
                assert!((fd - g[j]).abs() <= 1e-5 * scale, "fd {fd} vs {}", g[j]);
            }
            checked += 1;
        }
        assert!(checked > 150);
    }
}
