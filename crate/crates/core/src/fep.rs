//! The empirical process indexed by functions, and the small calculus built
//! on top of it.
//!
//! For iid draws `Z_1..Z_n` and a function `f` with known mean under the
//! sampling law, the normalized functional is
//! `G_n(f) = n^{-1/2} sum_i (f(Z_i) - E f)`. Jointly over finitely many
//! functions it converges to a centered Gaussian vector with covariance
//! `Gamma(f,g) = E[(f - Ef)(g - Eg)]`. Statistics that expand as
//! `constant + n^{-1/2} G_n(h) + o_P(n^{-1/2})` form an algebra — sums,
//! products, and quotients of expansions are again expansions — which is how
//! the plug-in correlation coefficient gets its limiting variance here.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::Law;
use crate::limits::{GaussianLimit, MonteCarloCfg};
use crate::metrics::empirical_cov;
use crate::replicate::map_replicates;

/// A function of one observation with its exact mean under the sampling law,
/// ready to be fed to the normalized functional.
#[derive(Clone)]
pub struct Statistic<T> {
    name: String,
    mean: f64,
    f: Arc<dyn Fn(&T) -> f64 + Send + Sync>,
}

impl<T> std::fmt::Debug for Statistic<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Statistic").field("name", &self.name).field("mean", &self.mean).finish()
    }
}

impl<T> Statistic<T> {
    pub fn new(
        name: impl Into<String>,
        mean: f64,
        f: Arc<dyn Fn(&T) -> f64 + Send + Sync>,
    ) -> Self {
        Statistic { name: name.into(), mean, f }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn eval(&self, z: &T) -> f64 {
        (self.f)(z)
    }
}

impl Statistic<f64> {
    /// Polynomial statistic with its mean computed exactly from the law's
    /// raw moments.
    pub fn from_polynomial(name: impl Into<String>, poly: &Polynomial, law: &Law) -> Result<Self> {
        let mean = poly.mean_under(law)?;
        let poly = poly.clone();
        Ok(Statistic::new(name, mean, Arc::new(move |z: &f64| poly.eval(*z))))
    }
}

/// `G_n(f) = n^{-1/2} sum_i (f(Z_i) - E f)` for each statistic.
pub fn fep_evaluate<T>(stats: &[Statistic<T>], sample: &[T]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::DegenerateSample("empty sample".into()));
    }
    let root_n = (sample.len() as f64).sqrt();
    Ok(stats
        .iter()
        .map(|stat| {
            let sum: f64 = sample.iter().map(|z| stat.eval(z) - stat.mean).sum();
            sum / root_n
        })
        .collect())
}

/// Real polynomial in coefficient form, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Coefficients lowest degree first; trailing zeros are trimmed and the
    /// zero polynomial is kept as a single zero coefficient.
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("polynomial coefficients must be finite".into()));
        }
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(Polynomial { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial::new(coeffs).expect("finite products of finite coefficients")
    }

    /// Exact mean under a law with closed-form raw moments.
    pub fn mean_under(&self, law: &Law) -> Result<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .try_fold(0.0, |acc, (k, &c)| {
                if c == 0.0 {
                    return Some(acc);
                }
                Some(acc + c * law.raw_moment(k)?)
            })
            .ok_or_else(|| {
                Error::MomentUnavailable(format!(
                    "{} lacks a closed-form raw moment up to order {}",
                    law.kind_name(),
                    self.degree()
                ))
            })
    }
}

impl std::fmt::Display for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c} x")?,
                _ => write!(f, "{c} x^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

/// Exact limit covariance `Gamma(p_i, p_j) = E[p_i p_j] - E p_i E p_j` of
/// polynomial statistics under a law with closed-form raw moments.
pub fn gamma_cov_exact(polys: &[Polynomial], law: &Law) -> Result<DMatrix<f64>> {
    if polys.is_empty() {
        return Err(Error::Shape("need at least one statistic".into()));
    }
    let means: Vec<f64> =
        polys.iter().map(|p| p.mean_under(law)).collect::<Result<_>>()?;
    let k = polys.len();
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let cross = polys[i].mul(&polys[j]).mean_under(law)?;
            let v = cross - means[i] * means[j];
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// Sampled estimate of the limit covariance with its Monte Carlo noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    pub matrix: DMatrix<f64>,
    pub n: usize,
    /// Rough half-width of the entrywise sampling noise, `3/sqrt(n)` times
    /// the natural scale of each entry.
    pub noise_scale: f64,
}

/// Estimate `Gamma` from one sample: the empirical covariance of the
/// statistic values.
pub fn gamma_cov_sample<T>(stats: &[Statistic<T>], sample: &[T]) -> Result<GammaEstimate> {
    if sample.len() < 2 {
        return Err(Error::DegenerateSample("need at least two observations".into()));
    }
    let rows: Vec<Vec<f64>> =
        sample.iter().map(|z| stats.iter().map(|s| s.eval(z)).collect()).collect();
    let matrix = empirical_cov(&rows)?;
    let n = sample.len();
    Ok(GammaEstimate { matrix, n, noise_scale: 3.0 / (n as f64).sqrt() })
}

/// The centered Gaussian limit of `(G_n(p_1), ..., G_n(p_k))`.
pub fn fidi_limit(polys: &[Polynomial], law: &Law) -> Result<GaussianLimit> {
    GaussianLimit::centered(gamma_cov_exact(polys, law)?)
}

/// A statistic admitting the expansion
/// `T_n = constant + n^{-1/2} G_n(h) + o_P(n^{-1/2})`, carried as the
/// constant plus the influence function `h`.
#[derive(Clone)]
pub struct Expansion<T> {
    constant: f64,
    influence: Arc<dyn Fn(&T) -> f64 + Send + Sync>,
}

impl<T> std::fmt::Debug for Expansion<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Expansion").field("constant", &self.constant).finish()
    }
}

impl<T> Expansion<T> {
    pub fn new(constant: f64, influence: Arc<dyn Fn(&T) -> f64 + Send + Sync>) -> Self {
        Expansion { constant, influence }
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn influence_at(&self, z: &T) -> f64 {
        (self.influence)(z)
    }
}

/// `(A + B, L + H)`: expansions add termwise.
pub fn expansion_sum<T: 'static>(a: &Expansion<T>, b: &Expansion<T>) -> Expansion<T> {
    let (la, lb) = (a.influence.clone(), b.influence.clone());
    Expansion::new(a.constant + b.constant, Arc::new(move |z: &T| la(z) + lb(z)))
}

/// `(A B, B L + A H)`: the product rule at first order.
pub fn expansion_product<T: 'static>(a: &Expansion<T>, b: &Expansion<T>) -> Expansion<T> {
    let (la, lb) = (a.influence.clone(), b.influence.clone());
    let (ca, cb) = (a.constant, b.constant);
    Expansion::new(ca * cb, Arc::new(move |z: &T| cb * la(z) + ca * lb(z)))
}

/// `(A/B, (1/B) L - (A/B^2) H)`: the quotient rule at first order. The
/// denominator's constant term must be nonzero.
pub fn expansion_quotient<T: 'static>(
    a: &Expansion<T>,
    b: &Expansion<T>,
) -> Result<Expansion<T>> {
    if b.constant == 0.0 {
        return Err(Error::DivisionByZeroConstant);
    }
    let (la, lb) = (a.influence.clone(), b.influence.clone());
    let (ca, cb) = (a.constant, b.constant);
    Ok(Expansion::new(
        ca / cb,
        Arc::new(move |z: &T| la(z) / cb - (ca / (cb * cb)) * lb(z)),
    ))
}

/// Sample Pearson correlation of paired observations.
pub fn plugin_correlation(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::DegenerateSample("need at least two pairs".into()));
    }
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x / n, ay + y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSample(
            "a coordinate is constant; correlation is undefined".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Standardized joint moments of a bivariate law, enough to price the
/// plug-in correlation's limiting variance. `mu_jk` denotes the central
/// moment `E[(X - EX)^j (Y - EY)^k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateMoments {
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub rho: f64,
    pub mu22: f64,
    pub mu31: f64,
    pub mu13: f64,
    pub mu4x: f64,
    pub mu4y: f64,
}

impl BivariateMoments {
    pub fn new(
        sigma_x2: f64,
        sigma_y2: f64,
        rho: f64,
        mu22: f64,
        mu31: f64,
        mu13: f64,
        mu4x: f64,
        mu4y: f64,
    ) -> Result<Self> {
        let all = [sigma_x2, sigma_y2, rho, mu22, mu31, mu13, mu4x, mu4y];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("moments must be finite".into()));
        }
        if sigma_x2 <= 0.0 || sigma_y2 <= 0.0 || mu22 <= 0.0 || mu4x <= 0.0 || mu4y <= 0.0 {
            return Err(Error::Domain("variance-type moments must be positive".into()));
        }
        if rho.abs() >= 1.0 {
            return Err(Error::Domain("rho must lie strictly inside (-1,1)".into()));
        }
        Ok(BivariateMoments { sigma_x2, sigma_y2, rho, mu22, mu31, mu13, mu4x, mu4y })
    }

    /// Moments of the bivariate Gaussian with standard margins and
    /// correlation `rho`.
    pub fn standard_gaussian(rho: f64) -> Result<Self> {
        Self::new(1.0, 1.0, rho, 1.0 + 2.0 * rho * rho, 3.0 * rho, 3.0 * rho, 3.0, 3.0)
    }
}

/// Limiting variance of `sqrt(n)(rho_n - rho)` for the plug-in correlation,
/// in terms of the joint central moments.
pub fn correlation_asymptotic_variance(m: &BivariateMoments) -> f64 {
    let (sx, sy) = (m.sigma_x2.sqrt(), m.sigma_y2.sqrt());
    (1.0 + m.rho * m.rho / 2.0) * m.mu22 / (m.sigma_x2 * m.sigma_y2)
        + m.rho * m.rho / 4.0
            * (m.mu4x / (m.sigma_x2 * m.sigma_x2) + m.mu4y / (m.sigma_y2 * m.sigma_y2))
        - m.rho * (m.mu31 / (sx * m.sigma_x2 * sy) + m.mu13 / (sx * sy * m.sigma_y2))
}

/// Sampling recipes for the plug-in correlation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CorrelationKind {
    /// Bivariate Gaussian pairs with correlation `rho`; the limit variance
    /// of `sqrt(n)(rho_n - rho)` is `(1 - rho^2)^2`.
    GaussianRho { rho: f64 },
    /// Independent coordinates; `sqrt(n) rho_n` is asymptotically standard
    /// normal, so the 1.96 test rejects at close to 5%.
    IndependentPair { x: Law, y: Law },
}

impl CorrelationKind {
    pub fn name(&self) -> &'static str {
        match self {
            CorrelationKind::GaussianRho { .. } => "correlation-gaussian",
            CorrelationKind::IndependentPair { .. } => "correlation-independent",
        }
    }
}

/// Result of a plug-in correlation experiment: the empirical variance of
/// the standardized statistic against its predicted limit, plus the rate at
/// which the |z| > 1.96 test rejects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub kind: String,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    /// Centering value: the true correlation of the pair law.
    pub rho0: f64,
    pub predicted_var: f64,
    pub empirical_var: f64,
    pub rejection_rate: f64,
}

pub fn run_correlation_experiment(
    kind: &CorrelationKind,
    cfg: &MonteCarloCfg,
) -> Result<CorrelationReport> {
    if cfg.n < 2 || cfg.reps < 2 {
        return Err(Error::Domain("need n >= 2 and reps >= 2".into()));
    }
    let (rho0, predicted_var) = match kind {
        CorrelationKind::GaussianRho { rho } => {
            let moments = BivariateMoments::standard_gaussian(*rho)?;
            (*rho, correlation_asymptotic_variance(&moments))
        }
        CorrelationKind::IndependentPair { .. } => (0.0, 1.0),
    };
    let gauss = Law::gaussian(0.0, 1.0)?;
    let values: Vec<Result<f64>> = match kind {
        CorrelationKind::GaussianRho { rho } => {
            let (rho, root) = (*rho, (1.0 - rho * rho).sqrt());
            map_replicates(cfg.seed, cfg.reps, move |_, rng| {
                let mut pairs = Vec::with_capacity(cfg.n as usize);
                for _ in 0..cfg.n {
                    let z1 = gauss.sample(rng);
                    let z2 = gauss.sample(rng);
                    pairs.push((z1, rho * z1 + root * z2));
                }
                Ok((cfg.n as f64).sqrt() * (plugin_correlation(&pairs)? - rho))
            })
        }
        CorrelationKind::IndependentPair { x, y } => {
            map_replicates(cfg.seed, cfg.reps, move |_, rng| {
                let mut pairs = Vec::with_capacity(cfg.n as usize);
                for _ in 0..cfg.n {
                    pairs.push((x.sample(rng), y.sample(rng)));
                }
                Ok((cfg.n as f64).sqrt() * plugin_correlation(&pairs)?)
            })
        }
    };
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let reps = values.len() as f64;
    let mean = values.iter().sum::<f64>() / reps;
    let empirical_var =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1.0);
    let crit = 1.96 * predicted_var.sqrt();
    let rejection_rate = values.iter().filter(|v| v.abs() > crit).count() as f64 / reps;
    Ok(CorrelationReport {
        kind: kind.name().to_string(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        rho0,
        predicted_var,
        empirical_var,
        rejection_rate,
    })
}
