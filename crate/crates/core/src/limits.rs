//! Limit descriptions and Monte Carlo experiments that confront them.
//!
//! Each experiment family pairs a sampling recipe (maxima under extreme-value
//! normalization, standardized sums, empirical-process or partial-sum
//! marginals, multinomial counts) with its Gaussian or extreme-value limit,
//! runs seeded replicates, and reports a single distance between the cloud
//! and the limit. Reports are plain serializable structs so drivers can embed
//! them verbatim.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::Law;
use crate::metrics::{empirical_cf, empirical_cov, ks_distance, tv_distance, DiscreteLawTable};
use crate::replicate::map_replicates;
use crate::sampling::OrderedSample;

/// Largest double strictly below one; quantile arguments are capped here so
/// powers like U^{1/n} never round up onto the closed endpoint.
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// Above this replicate size, maxima are drawn in one shot through the
/// quantile transform of U^{1/n} instead of scanning n draws.
pub const QUANTILE_TRICK_THRESHOLD: u64 = 10_000;

/// Common Monte Carlo knobs: per-replicate sample size, replicate count, and
/// the master seed all substreams derive from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloCfg {
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
}

/// A centered or shifted Gaussian limit: mean vector plus a validated
/// covariance matrix (symmetric within 1e-12, positive semidefinite up to a
/// 1e-10 diagonal ridge).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLimit {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianLimit {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || mean.len() != cov.nrows() {
            return Err(Error::Shape(format!(
                "mean of length {} against a {}x{} covariance",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) || cov.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("limit parameters must be finite".into()));
        }
        let scale = cov.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        for i in 0..cov.nrows() {
            for j in (i + 1)..cov.ncols() {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * (1.0 + scale) {
                    return Err(Error::Domain(format!(
                        "covariance is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        // Semidefiniteness up to roundoff: a tiny ridge must make the matrix
        // factorizable, otherwise some direction has genuinely negative
        // variance.
        let ridge = 1e-10 * (1.0 + scale);
        let mut probe = cov.clone();
        for i in 0..probe.nrows() {
            probe[(i, i)] += ridge;
        }
        if probe.cholesky().is_none() {
            return Err(Error::Domain("covariance is not positive semidefinite".into()));
        }
        Ok(GaussianLimit { mean, cov })
    }

    /// Zero-mean limit from a covariance alone.
    pub fn centered(cov: DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        Self::new(DVector::zeros(dim), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

fn validate_grid(grid: &[f64], open_top: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("time grid must be nonempty".into()));
    }
    let top_ok = |t: f64| if open_top { t < 1.0 } else { t <= 1.0 };
    if grid.iter().any(|&t| !(t > 0.0 && top_ok(t))) {
        return Err(Error::Domain(format!(
            "grid points must lie in (0,1{}",
            if open_top { ")" } else { "]" }
        )));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("grid points must be strictly increasing".into()));
    }
    Ok(())
}

/// Covariance of the limiting Gaussian bridge of the uniform empirical
/// process at the given times: `min(s,t) - s t`.
pub fn empirical_process_cov(grid: &[f64]) -> Result<GaussianLimit> {
    validate_grid(grid, true)?;
    let k = grid.len();
    let cov = DMatrix::from_fn(k, k, |i, j| grid[i].min(grid[j]) - grid[i] * grid[j]);
    GaussianLimit::centered(cov)
}

/// Covariance of the limiting Brownian marginals of normalized partial sums
/// at the given times: `min(s,t)`.
pub fn partial_sum_cov(grid: &[f64]) -> Result<GaussianLimit> {
    validate_grid(grid, false)?;
    let k = grid.len();
    let cov = DMatrix::from_fn(k, k, |i, j| grid[i].min(grid[j]));
    GaussianLimit::centered(cov)
}

/// Covariance of the standardized multinomial count vector
/// `(N_i - n p_i)/sqrt(n p_i)`: identity minus the rank-one projector onto
/// the root-probability direction, `delta_ij - sqrt(p_i p_j)`. The matrix
/// annihilates `sqrt(p)`, which is why the limit is degenerate.
pub fn multinomial_clt_covariance(probs: &[f64]) -> Result<DMatrix<f64>> {
    validate_probs(probs)?;
    let k = probs.len();
    Ok(DMatrix::from_fn(k, k, |i, j| {
        let cross = -(probs[i] * probs[j]).sqrt();
        if i == j {
            1.0 + cross
        } else {
            cross
        }
    }))
}

fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.len() < 2 {
        return Err(Error::Domain("need at least two categories".into()));
    }
    if probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Domain("category probabilities must lie in (0,1)".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "category probabilities must sum to 1 (+-1e-12), got {total}"
        )));
    }
    Ok(())
}

/// Base laws whose running maxima converge under affine normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvtFamily {
    /// Standard exponential maxima: `M_n - ln n` converges to the Gumbel law.
    Exponential,
    /// Pareto maxima: `M_n / n^{1/alpha}` converges to the Frechet law.
    Pareto { alpha: f64 },
    /// Uniform maxima: `n (M_n - 1)` converges to the unit Weibull law.
    Uniform,
}

impl EvtFamily {
    pub fn name(&self) -> &'static str {
        match self {
            EvtFamily::Exponential => "evt-gumbel",
            EvtFamily::Pareto { .. } => "evt-frechet",
            EvtFamily::Uniform => "evt-weibull",
        }
    }

    pub fn base_law(&self) -> Result<Law> {
        Ok(match *self {
            EvtFamily::Exponential => Law::Exponential1,
            EvtFamily::Pareto { alpha } => Law::pareto(alpha)?,
            EvtFamily::Uniform => Law::Uniform01,
        })
    }

    pub fn limit_law(&self) -> Result<Law> {
        Ok(match *self {
            EvtFamily::Exponential => Law::Gumbel,
            EvtFamily::Pareto { alpha } => Law::frechet(alpha)?,
            EvtFamily::Uniform => Law::weibull_evt(1.0)?,
        })
    }

    /// Normalizing scale and center `(a_n, b_n)` such that
    /// `(M_n - b_n)/a_n` converges to [`Self::limit_law`].
    pub fn normalization(&self, n: u64) -> (f64, f64) {
        let nf = n as f64;
        match *self {
            EvtFamily::Exponential => (1.0, nf.ln()),
            EvtFamily::Pareto { alpha } => (nf.powf(1.0 / alpha), 0.0),
            EvtFamily::Uniform => (1.0 / nf, 1.0),
        }
    }
}

/// Result of a maxima experiment: Kolmogorov–Smirnov distance between the
/// cloud of normalized maxima and the extreme-value limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxExperimentReport {
    pub family: String,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    /// True when maxima were drawn through the one-shot `U^{1/n}` transform
    /// rather than a naive scan of n draws.
    pub quantile_trick: bool,
    pub ks: f64,
}

/// Draw the cloud of normalized maxima for an extreme-value family, and
/// report whether the one-shot `U^{1/n}` transform supplied the draws.
pub fn max_replicates(family: &EvtFamily, cfg: &MonteCarloCfg) -> Result<(Vec<f64>, bool)> {
    if cfg.n == 0 || cfg.reps == 0 {
        return Err(Error::Domain("need n >= 1 and reps >= 1".into()));
    }
    let base = family.base_law()?;
    let (a, b) = family.normalization(cfg.n);
    let trick = cfg.n >= QUANTILE_TRICK_THRESHOLD;
    let nf = cfg.n as f64;
    let maxima = map_replicates(cfg.seed, cfg.reps, |_, rng| {
        let m = if trick {
            // The maximum of n draws has CDF F^n, so it equals in law the
            // quantile transform of V = U^{1/n}.
            let v = (rng.next_uniform().ln() / nf).exp().min(ONE_BELOW);
            base.quantile_u1(v)
        } else {
            let mut best = f64::NEG_INFINITY;
            for _ in 0..cfg.n {
                best = best.max(base.quantile_u1(rng.next_uniform()));
            }
            best
        };
        (m - b) / a
    });
    Ok((maxima, trick))
}

/// Draw `reps` normalized maxima of `n` base draws and measure the KS
/// distance to the extreme-value limit.
pub fn run_max_experiment(family: &EvtFamily, cfg: &MonteCarloCfg) -> Result<MaxExperimentReport> {
    let limit = family.limit_law()?;
    let (maxima, trick) = max_replicates(family, cfg)?;
    let sample = OrderedSample::from_unsorted(maxima, None)?;
    let ks = ks_distance(&sample, &limit)?;
    Ok(MaxExperimentReport {
        family: family.name().to_string(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        quantile_trick: trick,
        ks,
    })
}

/// Standardized-sum recipes whose replicate clouds approach the standard
/// Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CltFamily {
    /// One binomial count with `n` trials, standardized by `np(1-p)`.
    Binomial { p: f64 },
    /// One Poisson count with intensity `n`, standardized by its variance.
    Poisson,
    /// Trials needed for `n` successes, standardized: `p(X - n/p)/sqrt(n q)`.
    NegBinomial { p: f64 },
    /// Mean of `n` iid draws from a law with finite variance, standardized.
    IidMean { law: Law },
}

impl CltFamily {
    pub fn name(&self) -> &'static str {
        match self {
            CltFamily::Binomial { .. } => "clt-binomial",
            CltFamily::Poisson => "clt-poisson",
            CltFamily::NegBinomial { .. } => "clt-negbinom",
            CltFamily::IidMean { .. } => "clt-iid",
        }
    }
}

/// Draw the cloud of standardized replicates for a CLT family.
pub fn clt_replicates(family: &CltFamily, cfg: &MonteCarloCfg) -> Result<Vec<f64>> {
    if cfg.n == 0 || cfg.reps == 0 {
        return Err(Error::Domain("need n >= 1 and reps >= 1".into()));
    }
    let nf = cfg.n as f64;
    match family {
        CltFamily::Binomial { p } => {
            let law = Law::binomial(cfg.n, *p)?;
            let (center, spread) = (nf * p, (nf * p * (1.0 - p)).sqrt());
            Ok(map_replicates(cfg.seed, cfg.reps, move |_, rng| {
                (law.sample(rng) - center) / spread
            }))
        }
        CltFamily::Poisson => {
            let law = Law::poisson(nf)?;
            let spread = nf.sqrt();
            Ok(map_replicates(cfg.seed, cfg.reps, move |_, rng| {
                (law.sample(rng) - nf) / spread
            }))
        }
        CltFamily::NegBinomial { p } => {
            let law = Law::neg_binomial(cfg.n, *p)?;
            // X counts trials to the n-th success: mean n/p, and
            // p (X - n/p) / sqrt(n (1-p)) is asymptotically standard normal.
            let center = nf / p;
            let scale = p / (nf * (1.0 - p)).sqrt();
            Ok(map_replicates(cfg.seed, cfg.reps, move |_, rng| {
                scale * (law.sample(rng) - center)
            }))
        }
        CltFamily::IidMean { law } => {
            let mu = law.mean().ok_or_else(|| {
                Error::MomentUnavailable(format!("{} has no mean", law.kind_name()))
            })?;
            let var = law.variance().ok_or_else(|| {
                Error::MomentUnavailable(format!("{} has no variance", law.kind_name()))
            })?;
            if var <= 0.0 {
                return Err(Error::Domain("iid mean experiment needs positive variance".into()));
            }
            let scale = (nf / var).sqrt();
            let law = law.clone();
            Ok(map_replicates(cfg.seed, cfg.reps, move |_, rng| {
                let mut sum = 0.0;
                for _ in 0..cfg.n {
                    sum += law.sample(rng);
                }
                scale * (sum / nf - mu)
            }))
        }
    }
}

/// Result of a standardized-sum experiment: KS distance of the replicate
/// cloud to the standard Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub family: String,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub ks: f64,
}

pub fn run_clt_experiment(family: &CltFamily, cfg: &MonteCarloCfg) -> Result<CltReport> {
    let cloud = clt_replicates(family, cfg)?;
    let sample = OrderedSample::from_unsorted(cloud, None)?;
    let ks = ks_distance(&sample, &Law::gaussian(0.0, 1.0)?)?;
    Ok(CltReport {
        family: family.name().to_string(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        ks,
    })
}

/// Finite-dimensional marginal experiments on a time grid in the unit
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FidisFamily {
    /// Normalized uniform empirical process `sqrt(n)(F_n(t) - t)`; the limit
    /// covariance is the Brownian bridge's `min(s,t) - st`.
    UniformEmpirical,
    /// Normalized partial sums `S_{floor(nt)}/sqrt(n)` of standardized iid
    /// draws; the limit covariance is Brownian motion's `min(s,t)`.
    PartialSum { law: Law },
}

impl FidisFamily {
    pub fn name(&self) -> &'static str {
        match self {
            FidisFamily::UniformEmpirical => "fidis-empirical",
            FidisFamily::PartialSum { .. } => "fidis-partialsum",
        }
    }
}

/// Result of a finite-dimensional marginal experiment: empirical covariance
/// of the marginal vector across replicates against the limit covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidisReport {
    pub family: String,
    pub grid: Vec<f64>,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub empirical_cov: Vec<Vec<f64>>,
    pub limit_cov: Vec<Vec<f64>>,
    pub max_abs_error: f64,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()))
}

pub fn run_fidis_experiment(
    family: &FidisFamily,
    grid: &[f64],
    cfg: &MonteCarloCfg,
) -> Result<FidisReport> {
    if cfg.n == 0 || cfg.reps < 2 {
        return Err(Error::Domain("need n >= 1 and reps >= 2".into()));
    }
    let nf = cfg.n as f64;
    let (rows, limit) = match family {
        FidisFamily::UniformEmpirical => {
            let limit = empirical_process_cov(grid)?;
            let grid = grid.to_vec();
            let rows = map_replicates(cfg.seed, cfg.reps, move |_, rng| {
                let mut counts = vec![0u64; grid.len()];
                for _ in 0..cfg.n {
                    let u = rng.next_uniform();
                    for (c, &t) in counts.iter_mut().zip(&grid) {
                        if u <= t {
                            *c += 1;
                        }
                    }
                }
                counts
                    .iter()
                    .zip(&grid)
                    .map(|(&c, &t)| (c as f64 / nf - t) * nf.sqrt())
                    .collect::<Vec<f64>>()
            });
            (rows, limit)
        }
        FidisFamily::PartialSum { law } => {
            let limit = partial_sum_cov(grid)?;
            let mu = law.mean().ok_or_else(|| {
                Error::MomentUnavailable(format!("{} has no mean", law.kind_name()))
            })?;
            let var = law.variance().ok_or_else(|| {
                Error::MomentUnavailable(format!("{} has no variance", law.kind_name()))
            })?;
            if var <= 0.0 {
                return Err(Error::Domain("partial sums need positive variance".into()));
            }
            // Marginal indices floor(n t); a grid point below 1/n contributes
            // the empty sum, which is degenerate, so reject it.
            let cuts: Vec<u64> = grid.iter().map(|&t| (nf * t).floor() as u64).collect();
            if cuts[0] == 0 {
                return Err(Error::Domain(
                    "grid point below 1/n indexes an empty partial sum".into(),
                ));
            }
            let law = law.clone();
            let rows = map_replicates(cfg.seed, cfg.reps, move |_, rng| {
                let mut out = Vec::with_capacity(cuts.len());
                let mut sum = 0.0;
                let mut next = 0usize;
                for i in 1..=cfg.n {
                    sum += (law.sample(rng) - mu) / var.sqrt();
                    while next < cuts.len() && cuts[next] == i {
                        out.push(sum / nf.sqrt());
                        next += 1;
                    }
                }
                out
            });
            (rows, limit)
        }
    };
    let empirical = empirical_cov(&rows)?;
    let max_abs_error = max_abs_diff(&empirical, limit.cov());
    Ok(FidisReport {
        family: family.name().to_string(),
        grid: grid.to_vec(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        empirical_cov: matrix_rows(&empirical),
        limit_cov: matrix_rows(limit.cov()),
        max_abs_error,
    })
}

/// Result of the multinomial count experiment: empirical covariance of the
/// standardized count vector against `I - sqrt(p) sqrt(p)^T`, plus the
/// residual of the limit matrix annihilating the root-probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialReport {
    pub probs: Vec<f64>,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub empirical_cov: Vec<Vec<f64>>,
    pub limit_cov: Vec<Vec<f64>>,
    pub max_abs_error: f64,
    pub null_direction_residual: f64,
}

pub fn run_multinomial_experiment(
    probs: &[f64],
    cfg: &MonteCarloCfg,
) -> Result<MultinomialReport> {
    validate_probs(probs)?;
    if cfg.n == 0 || cfg.reps < 2 {
        return Err(Error::Domain("need n >= 1 and reps >= 2".into()));
    }
    let limit = multinomial_clt_covariance(probs)?;
    let nf = cfg.n as f64;
    let probs_vec = probs.to_vec();
    let rows = map_replicates(cfg.seed, cfg.reps, move |_, rng| {
        let mut counts = vec![0u64; probs_vec.len()];
        for _ in 0..cfg.n {
            let u = rng.next_uniform();
            let mut acc = 0.0;
            let mut idx = probs_vec.len() - 1;
            for (j, &p) in probs_vec.iter().enumerate() {
                acc += p;
                if u <= acc {
                    idx = j;
                    break;
                }
            }
            counts[idx] += 1;
        }
        counts
            .iter()
            .zip(&probs_vec)
            .map(|(&c, &p)| (c as f64 - nf * p) / (nf * p).sqrt())
            .collect::<Vec<f64>>()
    });
    let empirical = empirical_cov(&rows)?;
    let max_abs_error = max_abs_diff(&empirical, &limit);
    let root = DVector::from_iterator(probs.len(), probs.iter().map(|&p| p.sqrt()));
    let null_direction_residual = (&limit * &root).amax();
    Ok(MultinomialReport {
        probs: probs.to_vec(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        empirical_cov: matrix_rows(&empirical),
        limit_cov: matrix_rows(&limit),
        max_abs_error,
        null_direction_residual,
    })
}

/// Pairs of discrete laws whose total variation distance vanishes as the
/// approximation sharpens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TvApproxPair {
    /// Sampling without replacement against its with-replacement limit:
    /// hypergeometric draws versus the binomial with matched success rate.
    HypergeomBinomial { pop: u64, succ: u64, draws: u64 },
    /// Rare-events limit: binomial with success rate `lambda/n` versus the
    /// Poisson of intensity `lambda`.
    BinomialPoisson { n: u64, lambda_num: u64 },
}

impl TvApproxPair {
    pub fn name(&self) -> &'static str {
        match self {
            TvApproxPair::HypergeomBinomial { .. } => "tv-hyp-bin",
            TvApproxPair::BinomialPoisson { .. } => "tv-bin-poisson",
        }
    }

    /// The two tabulated laws of the pair.
    pub fn laws(&self) -> Result<(Law, Law)> {
        match *self {
            TvApproxPair::HypergeomBinomial { pop, succ, draws } => {
                let hyper = Law::hypergeometric(pop, succ, draws)?;
                let binom = Law::binomial(draws, succ as f64 / pop as f64)?;
                Ok((hyper, binom))
            }
            TvApproxPair::BinomialPoisson { n, lambda_num } => {
                if n <= lambda_num {
                    return Err(Error::Domain(
                        "rare-events pair needs n strictly above the intensity".into(),
                    ));
                }
                let binom = Law::binomial(n, lambda_num as f64 / n as f64)?;
                let poisson = Law::poisson(lambda_num as f64)?;
                Ok((binom, poisson))
            }
        }
    }

    /// Total variation distance between the two tabulated laws.
    pub fn tv(&self) -> Result<f64> {
        let (a, b) = self.laws()?;
        let ta = DiscreteLawTable::from_law(&a)?;
        let tb = DiscreteLawTable::from_law(&b)?;
        Ok(tv_distance(&ta, &tb))
    }
}

/// Result of the characteristic-function route to a Gaussian limit: the
/// empirical characteristic function of a standardized-sum cloud against
/// `exp(-u^2/2)` on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyReport {
    pub family: String,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub u_grid: Vec<f64>,
    pub gaps: Vec<f64>,
    pub sup_gap: f64,
}

/// Ten equally spaced frequencies spanning [-5, 5].
pub fn default_levy_grid() -> Vec<f64> {
    (0..10).map(|k| -5.0 + k as f64 * (10.0 / 9.0)).collect()
}

pub fn run_levy_experiment(
    family: &CltFamily,
    cfg: &MonteCarloCfg,
    u_grid: &[f64],
) -> Result<LevyReport> {
    if u_grid.is_empty() {
        return Err(Error::Domain("frequency grid must be nonempty".into()));
    }
    let cloud = clt_replicates(family, cfg)?;
    let gaps: Vec<f64> = u_grid
        .iter()
        .map(|&u| {
            let target = (-u * u / 2.0).exp();
            (empirical_cf(&cloud, u) - target).norm()
        })
        .collect();
    let sup_gap = gaps.iter().fold(0.0f64, |m, &g| m.max(g));
    Ok(LevyReport {
        family: family.name().to_string(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        u_grid: u_grid.to_vec(),
        gaps,
        sup_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_limit_validates_inputs() {
        let good = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(GaussianLimit::centered(good).is_ok());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(GaussianLimit::centered(asym), Err(Error::Domain(_))));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(GaussianLimit::centered(indef), Err(Error::Domain(_))));
        // Degenerate but consistent matrices pass (rank one).
        let rank_one = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(GaussianLimit::centered(rank_one).is_ok());
        let bad_dim = GaussianLimit::new(
            DVector::zeros(3),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
        );
        assert!(matches!(bad_dim, Err(Error::Shape(_))));
    }

    #[test]
    fn bridge_and_motion_covariances_frozen() {
        let grid = [0.2, 0.5, 0.8];
        let bridge = empirical_process_cov(&grid).unwrap();
        let want_bridge = [
            [0.16, 0.10, 0.04],
            [0.10, 0.25, 0.10],
            [0.04, 0.10, 0.16],
        ];
        let motion = partial_sum_cov(&grid).unwrap();
        let want_motion = [
            [0.2, 0.2, 0.2],
            [0.2, 0.5, 0.5],
            [0.2, 0.5, 0.8],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((bridge.cov()[(i, j)] - want_bridge[i][j]).abs() < 1e-15);
                assert!((motion.cov()[(i, j)] - want_motion[i][j]).abs() < 1e-15);
            }
        }
        assert!(empirical_process_cov(&[0.2, 1.0]).is_err()); // bridge dies at 1
        assert!(partial_sum_cov(&[0.2, 1.0]).is_ok()); // motion is fine at 1
        assert!(partial_sum_cov(&[0.5, 0.5]).is_err());
        assert!(partial_sum_cov(&[]).is_err());
    }

    #[test]
    fn multinomial_covariance_frozen_and_degenerate() {
        let probs = [0.2, 0.3, 0.5];
        let cov = multinomial_clt_covariance(&probs).unwrap();
        assert!((cov[(0, 0)] - 0.8).abs() < 1e-15);
        assert!((cov[(1, 1)] - 0.7).abs() < 1e-15);
        assert!((cov[(2, 2)] - 0.5).abs() < 1e-15);
        assert!((cov[(0, 1)] + 0.06f64.sqrt()).abs() < 1e-15);
        assert!((cov[(0, 2)] + 0.10f64.sqrt()).abs() < 1e-15);
        assert!((cov[(1, 2)] + 0.15f64.sqrt()).abs() < 1e-15);
        let root = DVector::from_iterator(3, probs.iter().map(|&p| p.sqrt()));
        assert!((cov * root).amax() < 1e-12);
        assert!(multinomial_clt_covariance(&[0.5, 0.4]).is_err());
        assert!(multinomial_clt_covariance(&[1.0]).is_err());
    }

    #[test]
    fn evt_normalizations_frozen() {
        assert_eq!(EvtFamily::Exponential.normalization(100), (1.0, 100.0f64.ln()));
        let (a, b) = EvtFamily::Pareto { alpha: 2.0 }.normalization(100);
        assert!((a - 10.0).abs() < 1e-12 && b == 0.0);
        assert_eq!(EvtFamily::Uniform.normalization(100), (0.01, 1.0));
    }

    /// Deterministic route to the same limits: `F^n(a_n x + b_n)` evaluated
    /// directly must approach the limit CDF pointwise.
    #[test]
    fn normalized_max_cdf_powers_approach_limits() {
        let n = 1_000_000u64;
        let families = [
            EvtFamily::Exponential,
            EvtFamily::Pareto { alpha: 2.0 },
            EvtFamily::Uniform,
        ];
        for family in &families {
            let base = family.base_law().unwrap();
            let limit = family.limit_law().unwrap();
            let (a, b) = family.normalization(n);
            for i in -4..=8 {
                let x = i as f64 * 0.5;
                let h = limit.cdf(x);
                if h <= 1e-6 || h >= 1.0 - 1e-9 {
                    continue;
                }
                let got = base.cdf(a * x + b).powi(n as i32);
                assert!(
                    (got - h).abs() < 0.01,
                    "{}: x={x} got {got} want {h}",
                    family.name()
                );
            }
        }
    }

    #[test]
    fn max_experiment_small_run_is_close_and_deterministic() {
        let cfg = MonteCarloCfg { n: 2_000, reps: 600, seed: 42 };
        let report = run_max_experiment(&EvtFamily::Exponential, &cfg).unwrap();
        assert!(!report.quantile_trick);
        assert!(report.ks < 0.08, "ks = {}", report.ks);
        let again = run_max_experiment(&EvtFamily::Exponential, &cfg).unwrap();
        assert_eq!(report.ks.to_bits(), again.ks.to_bits());

        // Same configuration through the one-shot transform: still close to
        // the limit (the transform changes the draw, not the law).
        let big = MonteCarloCfg { n: 20_000, reps: 600, seed: 42 };
        let report = run_max_experiment(&EvtFamily::Uniform, &big).unwrap();
        assert!(report.quantile_trick);
        assert!(report.ks < 0.08, "ks = {}", report.ks);
    }

    #[test]
    fn clt_small_runs_are_close() {
        let cfg = MonteCarloCfg { n: 400, reps: 600, seed: 7 };
        for family in [
            CltFamily::Binomial { p: 0.3 },
            CltFamily::Poisson,
            CltFamily::NegBinomial { p: 0.3 },
            CltFamily::IidMean { law: Law::Exponential1 },
        ] {
            let report = run_clt_experiment(&family, &cfg).unwrap();
            assert!(report.ks < 0.08, "{}: ks = {}", report.family, report.ks);
        }
    }

    #[test]
    fn clt_rejects_momentless_bases() {
        let cfg = MonteCarloCfg { n: 100, reps: 10, seed: 0 };
        let heavy = CltFamily::IidMean { law: Law::pareto(1.5).unwrap() };
        assert!(matches!(
            run_clt_experiment(&heavy, &cfg),
            Err(Error::MomentUnavailable(_))
        ));
    }

    #[test]
    fn fidis_small_runs_track_their_covariances() {
        let grid = [0.2, 0.5, 0.8];
        let cfg = MonteCarloCfg { n: 400, reps: 2_000, seed: 11 };
        let emp = run_fidis_experiment(&FidisFamily::UniformEmpirical, &grid, &cfg).unwrap();
        assert!(emp.max_abs_error < 0.06, "err = {}", emp.max_abs_error);
        let law = Law::gaussian(0.0, 1.0).unwrap();
        let sums = run_fidis_experiment(&FidisFamily::PartialSum { law }, &grid, &cfg).unwrap();
        assert!(sums.max_abs_error < 0.10, "err = {}", sums.max_abs_error);
        // The partial-sum recipe demands standardizable moments.
        let heavy = FidisFamily::PartialSum { law: Law::frechet(1.5).unwrap() };
        assert!(run_fidis_experiment(&heavy, &grid, &cfg).is_err());
    }

    #[test]
    fn multinomial_small_run_tracks_covariance() {
        let cfg = MonteCarloCfg { n: 300, reps: 3_000, seed: 5 };
        let report = run_multinomial_experiment(&[0.2, 0.3, 0.5], &cfg).unwrap();
        assert!(report.max_abs_error < 0.08, "err = {}", report.max_abs_error);
        assert!(report.null_direction_residual < 1e-12);
        assert!(run_multinomial_experiment(&[0.2, 0.3], &cfg).is_err());
    }

    #[test]
    fn hypergeometric_binomial_tv_shrinks_with_population() {
        let small = TvApproxPair::HypergeomBinomial { pop: 100, succ: 50, draws: 20 };
        let large = TvApproxPair::HypergeomBinomial { pop: 10_000, succ: 5_000, draws: 20 };
        let (tv_small, tv_large) = (small.tv().unwrap(), large.tv().unwrap());
        assert!(tv_large < tv_small, "{tv_large} vs {tv_small}");
        assert!(tv_large <= 0.02, "tv = {tv_large}");
    }

    #[test]
    fn binomial_poisson_tv_shrinks_with_n() {
        let tvs: Vec<f64> = [10u64, 100, 1000]
            .iter()
            .map(|&n| TvApproxPair::BinomialPoisson { n, lambda_num: 1 }.tv().unwrap())
            .collect();
        assert!(tvs[1] < tvs[0] && tvs[2] < tvs[1], "{tvs:?}");
        assert!(tvs[2] <= 0.01, "tv = {}", tvs[2]);
        let bad = TvApproxPair::BinomialPoisson { n: 5, lambda_num: 5 };
        assert!(bad.tv().is_err());
    }

    #[test]
    fn levy_gaps_shrink_toward_the_gaussian_cf() {
        let family = CltFamily::Binomial { p: 0.3 };
        let cfg = MonteCarloCfg { n: 500, reps: 4_000, seed: 3 };
        let grid = default_levy_grid();
        assert_eq!(grid.len(), 10);
        assert!((grid[0] + 5.0).abs() < 1e-12 && (grid[9] - 5.0).abs() < 1e-12);
        let report = run_levy_experiment(&family, &cfg, &grid).unwrap();
        assert!(report.sup_gap < 0.06, "sup gap = {}", report.sup_gap);
        assert_eq!(report.gaps.len(), 10);
    }
}
