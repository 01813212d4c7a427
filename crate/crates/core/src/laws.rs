//! Catalog of probability laws with closed-form distribution functions.
//!
//! Each law exposes its CDF `F`, a density or mass function, a generalized
//! inverse (quantile) `F^{-1}(u) = inf{x : F(x) >= u}`, and, for a subset of
//! the catalog, the characteristic function and closed-form moments.
//!
//! Continuous quantiles use closed forms where they exist (a numeric inversion
//! backs the Gaussian and Beta laws, polished so that `F(F^{-1}(u))` reproduces
//! `u` at double precision). Discrete quantiles are computed by a forward scan
//! over the support with early exit; the scan works in log space so that
//! binomial and hypergeometric coefficients stay representable for sizes up to
//! about 10^6. Infinite discrete supports are truncated once the remaining
//! tail mass drops below 1e-15.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::{erf, erf_inv};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quantile::DistributionFunction;
use crate::sampling::RngStream;

/// Tail mass below which an infinite discrete support is truncated.
pub const TAIL_EPS: f64 = 1e-15;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// A probability law from the closed-form catalog.
///
/// Variants are public for matching; construct through the checked
/// constructors or [`Law::parse`] so parameter domains are enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Law {
    /// Uniform on (0,1).
    Uniform01,
    /// Standard exponential, `F(x) = 1 - e^{-x}` for `x >= 0`.
    Exponential1,
    /// Pareto with tail index `alpha`: `F(x) = 1 - x^{-alpha}` for `x >= 1`.
    Pareto { alpha: f64 },
    /// Standard Gumbel extreme-value law, `F(x) = exp(-e^{-x})`.
    Gumbel,
    /// Frechet extreme-value law, `F(x) = exp(-x^{-alpha})` for `x >= 0`.
    Frechet { alpha: f64 },
    /// Weibull extreme-value law supported on the negative half-line:
    /// `F(x) = exp(-(-x)^beta)` for `x < 0`, and 1 for `x >= 0`.
    WeibullEvt { beta: f64 },
    /// Gaussian with mean `mu` and variance `sigma2`.
    Gaussian { mu: f64, sigma2: f64 },
    /// Beta law on (0,1) with shape parameters `a`, `b`.
    Beta { a: f64, b: f64 },
    /// Poisson with rate `lambda`.
    Poisson { lambda: f64 },
    /// Binomial with `n` trials and success probability `p`.
    Binomial { n: u64, p: f64 },
    /// Negative binomial: number of trials needed to collect `k` successes
    /// with per-trial success probability `p`; support starts at `k`.
    NegBinomial { k: u64, p: f64 },
    /// Hypergeometric: `draws` draws without replacement from a population of
    /// `pop` items of which `succ` are marked.
    Hypergeometric { pop: u64, succ: u64, draws: u64 },
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg.to_string()))
    }
}

impl Law {
    pub fn pareto(alpha: f64) -> Result<Self> {
        require(alpha.is_finite() && alpha > 0.0, "pareto requires alpha > 0")?;
        Ok(Law::Pareto { alpha })
    }

    pub fn frechet(alpha: f64) -> Result<Self> {
        require(alpha.is_finite() && alpha > 0.0, "frechet requires alpha > 0")?;
        Ok(Law::Frechet { alpha })
    }

    pub fn weibull_evt(beta: f64) -> Result<Self> {
        require(beta.is_finite() && beta > 0.0, "weibull requires beta > 0")?;
        Ok(Law::WeibullEvt { beta })
    }

    pub fn gaussian(mu: f64, sigma2: f64) -> Result<Self> {
        require(mu.is_finite(), "gauss requires finite mu")?;
        require(sigma2.is_finite() && sigma2 > 0.0, "gauss requires sigma2 > 0")?;
        Ok(Law::Gaussian { mu, sigma2 })
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        require(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0, "beta requires a > 0 and b > 0")?;
        Ok(Law::Beta { a, b })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        require(lambda.is_finite() && lambda > 0.0, "poisson requires lambda > 0")?;
        Ok(Law::Poisson { lambda })
    }

    pub fn binomial(n: u64, p: f64) -> Result<Self> {
        require(n >= 1, "binom requires n >= 1")?;
        require(p.is_finite() && p > 0.0 && p < 1.0, "binom requires 0 < p < 1")?;
        Ok(Law::Binomial { n, p })
    }

    pub fn neg_binomial(k: u64, p: f64) -> Result<Self> {
        require(k >= 1, "negbinom requires k >= 1")?;
        require(p.is_finite() && p > 0.0 && p < 1.0, "negbinom requires 0 < p < 1")?;
        Ok(Law::NegBinomial { k, p })
    }

    pub fn hypergeometric(pop: u64, succ: u64, draws: u64) -> Result<Self> {
        require(pop >= 2, "hypergeom requires pop >= 2")?;
        require(succ >= 1 && succ < pop, "hypergeom requires 1 <= succ < pop")?;
        require(draws >= 1 && draws <= pop, "hypergeom requires 1 <= draws <= pop")?;
        Ok(Law::Hypergeometric { pop, succ, draws })
    }

    /// Short lowercase name of the law kind, as used by the spec grammar.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Law::Uniform01 => "uniform01",
            Law::Exponential1 => "exp1",
            Law::Pareto { .. } => "pareto",
            Law::Gumbel => "gumbel",
            Law::Frechet { .. } => "frechet",
            Law::WeibullEvt { .. } => "weibull",
            Law::Gaussian { .. } => "gauss",
            Law::Beta { .. } => "beta",
            Law::Poisson { .. } => "poisson",
            Law::Binomial { .. } => "binom",
            Law::NegBinomial { .. } => "negbinom",
            Law::Hypergeometric { .. } => "hypergeom",
        }
    }

    /// True for laws with a density, false for counting laws.
    pub fn is_continuous(&self) -> bool {
        !matches!(
            self,
            Law::Poisson { .. } | Law::Binomial { .. } | Law::NegBinomial { .. } | Law::Hypergeometric { .. }
        )
    }

    /// Essential infimum and supremum of the support (may be infinite).
    pub fn support_bounds(&self) -> (f64, f64) {
        match self {
            Law::Uniform01 => (0.0, 1.0),
            Law::Exponential1 => (0.0, f64::INFINITY),
            Law::Pareto { .. } => (1.0, f64::INFINITY),
            Law::Gumbel => (f64::NEG_INFINITY, f64::INFINITY),
            Law::Frechet { .. } => (0.0, f64::INFINITY),
            Law::WeibullEvt { .. } => (f64::NEG_INFINITY, 0.0),
            Law::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Law::Beta { .. } => (0.0, 1.0),
            Law::Poisson { .. } | Law::NegBinomial { .. } => {
                let (lo, _) = self.discrete_range().expect("discrete");
                (lo as f64, f64::INFINITY)
            }
            Law::Binomial { .. } | Law::Hypergeometric { .. } => {
                let (lo, hi) = self.discrete_range().expect("discrete");
                (lo as f64, hi.expect("finite support") as f64)
            }
        }
    }

    /// First support point and (for finite supports) the last one.
    fn discrete_range(&self) -> Option<(u64, Option<u64>)> {
        match *self {
            Law::Poisson { .. } => Some((0, None)),
            Law::Binomial { n, .. } => Some((0, Some(n))),
            Law::NegBinomial { k, .. } => Some((k, None)),
            Law::Hypergeometric { pop, succ, draws } => {
                let lo = draws.saturating_sub(pop - succ);
                Some((lo, Some(draws.min(succ))))
            }
            _ => None,
        }
    }

    /// Distribution function `F(x) = P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Law::Uniform01 => x.clamp(0.0, 1.0),
            Law::Exponential1 => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            Law::Pareto { alpha } => {
                if x < 1.0 {
                    0.0
                } else {
                    1.0 - x.powf(-alpha)
                }
            }
            Law::Gumbel => (-(-x).exp()).exp(),
            Law::Frechet { alpha } => {
                if x <= 0.0 {
                    0.0
                } else {
                    (-x.powf(-alpha)).exp()
                }
            }
            Law::WeibullEvt { beta } => {
                if x >= 0.0 {
                    1.0
                } else {
                    (-(-x).powf(beta)).exp()
                }
            }
            Law::Gaussian { mu, sigma2 } => {
                if x.is_infinite() {
                    return if x > 0.0 { 1.0 } else { 0.0 };
                }
                let z = (x - mu) / sigma2.sqrt();
                0.5 * (1.0 + erf(z / SQRT_2))
            }
            Law::Beta { a, b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(a, b, x)
                }
            }
            _ => self.discrete_cdf(x),
        }
    }

    /// Left limit `F(x-) = P(X < x)`; differs from `cdf` only at atoms.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if self.is_continuous() {
            self.cdf(x)
        } else if x.is_finite() {
            self.discrete_cdf(x) - self.pdf_or_pmf(x)
        } else if x > 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// Density (continuous laws) or mass at integer points (discrete laws).
    pub fn pdf_or_pmf(&self, x: f64) -> f64 {
        match *self {
            Law::Uniform01 => {
                if x > 0.0 && x < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Exponential1 => {
                if x >= 0.0 {
                    (-x).exp()
                } else {
                    0.0
                }
            }
            Law::Pareto { alpha } => {
                if x >= 1.0 {
                    alpha * x.powf(-alpha - 1.0)
                } else {
                    0.0
                }
            }
            Law::Gumbel => {
                let e = (-x).exp();
                e * (-e).exp()
            }
            Law::Frechet { alpha } => {
                if x > 0.0 {
                    alpha * x.powf(-alpha - 1.0) * (-x.powf(-alpha)).exp()
                } else {
                    0.0
                }
            }
            Law::WeibullEvt { beta } => {
                if x < 0.0 {
                    beta * (-x).powf(beta - 1.0) * (-(-x).powf(beta)).exp()
                } else {
                    0.0
                }
            }
            Law::Gaussian { mu, sigma2 } => {
                let sigma = sigma2.sqrt();
                let z = (x - mu) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Law::Beta { a, b } => {
                if x > 0.0 && x < 1.0 {
                    ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)).exp()
                } else {
                    0.0
                }
            }
            _ => {
                if !x.is_finite() || x.fract() != 0.0 || x < 0.0 {
                    return 0.0;
                }
                self.ln_pmf(x as u64).map_or(0.0, f64::exp)
            }
        }
    }

    /// Log mass at the integer point `k`, or `None` outside the support.
    pub fn ln_pmf(&self, k: u64) -> Option<f64> {
        let (lo, hi) = self.discrete_range()?;
        if k < lo || hi.is_some_and(|h| k > h) {
            return None;
        }
        let kf = k as f64;
        Some(match *self {
            Law::Poisson { lambda } => kf * lambda.ln() - lambda - ln_gamma(kf + 1.0),
            Law::Binomial { n, p } => {
                ln_choose(n as f64, kf) + kf * p.ln() + (n - k) as f64 * (1.0 - p).ln()
            }
            Law::NegBinomial { k: succ, p } => {
                ln_choose(kf - 1.0, succ as f64 - 1.0)
                    + succ as f64 * p.ln()
                    + (k - succ) as f64 * (1.0 - p).ln()
            }
            Law::Hypergeometric { pop, succ, draws } => {
                ln_choose(succ as f64, kf) + ln_choose((pop - succ) as f64, (draws - k) as f64)
                    - ln_choose(pop as f64, draws as f64)
            }
            _ => unreachable!("discrete_range returned Some for a continuous law"),
        })
    }

    fn discrete_cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let mut walk = DiscreteWalk::new(self).expect("discrete law");
        if x < walk.k as f64 {
            return 0.0;
        }
        // Jumping past a finite support end lands exactly on total mass one,
        // keeping cdf and quantile consistent near u = 1.
        if let Some(hi) = walk.upper {
            if x >= hi as f64 {
                return 1.0;
            }
        }
        while (walk.k as f64) < x.floor() {
            if walk.tail() < TAIL_EPS || !walk.advance() {
                break;
            }
        }
        walk.cum.min(1.0)
    }

    /// Generalized inverse `F^{-1}(u) = inf{x : F(x) >= u}` for `u` in (0,1).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        require(u.is_finite() && u > 0.0 && u < 1.0, "quantile requires 0 < u < 1")?;
        Ok(self.quantile_u1(u))
    }

    /// Quantile on the half-open interval (0,1]; `u = 1` yields the essential
    /// supremum (with infinite discrete supports truncated at the tail rule).
    pub(crate) fn quantile_u1(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0);
        match *self {
            Law::Uniform01 => u,
            Law::Exponential1 => -(-u).ln_1p(),
            Law::Pareto { alpha } => (-(-u).ln_1p() / alpha).exp(),
            Law::Gumbel => -(-u.ln()).ln(),
            Law::Frechet { alpha } => (-u.ln()).powf(-1.0 / alpha),
            Law::WeibullEvt { beta } => -(-u.ln()).powf(1.0 / beta),
            Law::Gaussian { mu, sigma2 } => gaussian_quantile(mu, sigma2.sqrt(), u),
            Law::Beta { a, b } => beta_quantile(a, b, u),
            _ => self.discrete_quantile(u),
        }
    }

    fn discrete_quantile(&self, u: f64) -> f64 {
        let mut walk = DiscreteWalk::new(self).expect("discrete law");
        while walk.cum < u {
            if walk.tail() < TAIL_EPS || !walk.advance() {
                break;
            }
        }
        walk.k as f64
    }

    /// Characteristic function `E[e^{iuX}]` for the closed-form subset
    /// (Gaussian, Poisson, Binomial, Exponential1, Uniform01).
    pub fn charfun(&self, u: f64) -> Result<Complex64> {
        match *self {
            Law::Gaussian { mu, sigma2 } => Ok(Complex64::new(-0.5 * sigma2 * u * u, mu * u).exp()),
            Law::Poisson { lambda } => {
                let eiu = Complex64::from_polar(1.0, u);
                Ok(((eiu - 1.0) * lambda).exp())
            }
            Law::Binomial { n, p } => {
                let base = Complex64::new(1.0 - p, 0.0) + Complex64::from_polar(p, u);
                Ok(if n <= u32::MAX as u64 {
                    base.powu(n as u32)
                } else {
                    (base.ln() * n as f64).exp()
                })
            }
            Law::Exponential1 => Ok(Complex64::new(1.0, 0.0) / Complex64::new(1.0, -u)),
            Law::Uniform01 => {
                if u == 0.0 {
                    Ok(Complex64::new(1.0, 0.0))
                } else {
                    let iu = Complex64::new(0.0, u);
                    Ok((iu.exp() - 1.0) / iu)
                }
            }
            _ => Err(Error::UnsupportedCharFun(self.kind_name().to_string())),
        }
    }

    /// Mean, when finite.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            Law::Uniform01 => Some(0.5),
            Law::Exponential1 => Some(1.0),
            Law::Pareto { alpha } => (alpha > 1.0).then(|| alpha / (alpha - 1.0)),
            Law::Gumbel => Some(EULER_GAMMA),
            Law::Frechet { alpha } => (alpha > 1.0).then(|| gamma(1.0 - 1.0 / alpha)),
            Law::WeibullEvt { beta } => Some(-gamma(1.0 + 1.0 / beta)),
            Law::Gaussian { mu, .. } => Some(mu),
            Law::Beta { a, b } => Some(a / (a + b)),
            Law::Poisson { lambda } => Some(lambda),
            Law::Binomial { n, p } => Some(n as f64 * p),
            Law::NegBinomial { k, p } => Some(k as f64 / p),
            Law::Hypergeometric { pop, succ, draws } => {
                Some(draws as f64 * succ as f64 / pop as f64)
            }
        }
    }

    /// Variance, when finite.
    pub fn variance(&self) -> Option<f64> {
        match *self {
            Law::Uniform01 => Some(1.0 / 12.0),
            Law::Exponential1 => Some(1.0),
            Law::Pareto { alpha } => {
                (alpha > 2.0).then(|| alpha / ((alpha - 1.0) * (alpha - 1.0) * (alpha - 2.0)))
            }
            Law::Gumbel => Some(std::f64::consts::PI * std::f64::consts::PI / 6.0),
            Law::Frechet { alpha } => (alpha > 2.0).then(|| {
                let g1 = gamma(1.0 - 1.0 / alpha);
                gamma(1.0 - 2.0 / alpha) - g1 * g1
            }),
            Law::WeibullEvt { beta } => {
                let g1 = gamma(1.0 + 1.0 / beta);
                Some(gamma(1.0 + 2.0 / beta) - g1 * g1)
            }
            Law::Gaussian { sigma2, .. } => Some(sigma2),
            Law::Beta { a, b } => Some(a * b / ((a + b) * (a + b) * (a + b + 1.0))),
            Law::Poisson { lambda } => Some(lambda),
            Law::Binomial { n, p } => Some(n as f64 * p * (1.0 - p)),
            Law::NegBinomial { k, p } => Some(k as f64 * (1.0 - p) / (p * p)),
            Law::Hypergeometric { pop, succ, draws } => {
                let (n, m, draws) = (pop as f64, succ as f64, draws as f64);
                let frac = m / n;
                Some(draws * frac * (1.0 - frac) * (n - draws) / (n - 1.0))
            }
        }
    }

    /// Raw moment `E[X^order]` for laws with a closed form
    /// (Uniform01, Exponential1, Gaussian); `None` otherwise.
    pub fn raw_moment(&self, order: usize) -> Option<f64> {
        match *self {
            Law::Uniform01 => Some(1.0 / (order as f64 + 1.0)),
            Law::Exponential1 => {
                if order > 170 {
                    return None;
                }
                Some((1..=order).fold(1.0, |acc, j| acc * j as f64))
            }
            Law::Gaussian { mu, sigma2 } => {
                // m_k = mu m_{k-1} + (k-1) sigma^2 m_{k-2}
                let (mut prev, mut cur) = (1.0, mu);
                if order == 0 {
                    return Some(1.0);
                }
                for k in 2..=order {
                    let next = mu * cur + (k as f64 - 1.0) * sigma2 * prev;
                    prev = cur;
                    cur = next;
                }
                Some(cur)
            }
            _ => None,
        }
    }

    /// One draw by inverse transform, `X = F^{-1}(U)`; the negative binomial
    /// is drawn as a sum of geometric trial counts instead of scanning its
    /// full quantile, which keeps large `k` affordable.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Law::NegBinomial { k, p } => {
                let ln_q = (-p).ln_1p();
                let mut total = 0u64;
                for _ in 0..k {
                    total += geometric_draw(rng.next_uniform(), ln_q);
                }
                total as f64
            }
            _ => self.quantile_u1(rng.next_uniform()),
        }
    }

    /// Parse a law specification of the form `kind` or `kind:key=value,...`,
    /// e.g. `pareto:alpha=2`, `binom:n=100,p=0.3`, `gauss:mu=0,sigma2=1`.
    pub fn parse(spec: &str) -> Result<Law> {
        let spec = spec.trim();
        let (kind, rest) = match spec.split_once(':') {
            Some((k, r)) => (k.trim(), Some(r)),
            None => (spec, None),
        };
        let mut params = Params::parse(rest)?;
        let law = match kind {
            "uniform01" => Law::Uniform01,
            "exp1" => Law::Exponential1,
            "gumbel" => Law::Gumbel,
            "pareto" => Law::pareto(params.take_f64("alpha")?)?,
            "frechet" => Law::frechet(params.take_f64("alpha")?)?,
            "weibull" => Law::weibull_evt(params.take_f64("beta")?)?,
            "gauss" => Law::gaussian(
                params.take_f64_or("mu", 0.0)?,
                params.take_f64_or("sigma2", 1.0)?,
            )?,
            "beta" => Law::beta(params.take_f64("a")?, params.take_f64("b")?)?,
            "poisson" => Law::poisson(params.take_f64("lambda")?)?,
            "binom" => Law::binomial(params.take_u64("n")?, params.take_f64("p")?)?,
            "negbinom" => Law::neg_binomial(params.take_u64("k")?, params.take_f64("p")?)?,
            "hypergeom" => Law::hypergeometric(
                params.take_u64("pop")?,
                params.take_u64("succ")?,
                params.take_u64("draws")?,
            )?,
            other => return Err(Error::Parse(format!("unknown law kind `{other}`"))),
        };
        params.finish(kind)?;
        Ok(law)
    }
}

impl std::fmt::Display for Law {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Law::Uniform01 | Law::Exponential1 | Law::Gumbel => write!(f, "{}", self.kind_name()),
            Law::Pareto { alpha } | Law::Frechet { alpha } => {
                write!(f, "{}:alpha={alpha}", self.kind_name())
            }
            Law::WeibullEvt { beta } => write!(f, "weibull:beta={beta}"),
            Law::Gaussian { mu, sigma2 } => write!(f, "gauss:mu={mu},sigma2={sigma2}"),
            Law::Beta { a, b } => write!(f, "beta:a={a},b={b}"),
            Law::Poisson { lambda } => write!(f, "poisson:lambda={lambda}"),
            Law::Binomial { n, p } => write!(f, "binom:n={n},p={p}"),
            Law::NegBinomial { k, p } => write!(f, "negbinom:k={k},p={p}"),
            Law::Hypergeometric { pop, succ, draws } => {
                write!(f, "hypergeom:pop={pop},succ={succ},draws={draws}")
            }
        }
    }
}

impl DistributionFunction for Law {
    fn cdf(&self, x: f64) -> f64 {
        Law::cdf(self, x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        Law::cdf_left(self, x)
    }

    fn quantile_unchecked(&self, u: f64) -> f64 {
        self.quantile_u1(u)
    }

    fn support(&self) -> (f64, f64) {
        self.support_bounds()
    }
}

/// Key=value parameter list for the law grammar.
struct Params(Vec<(String, String)>);

impl Params {
    fn parse(rest: Option<&str>) -> Result<Self> {
        let mut out = Vec::new();
        if let Some(rest) = rest {
            if rest.trim().is_empty() {
                return Err(Error::Parse("empty parameter list after `:`".into()));
            }
            for item in rest.split(',') {
                let (key, value) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
                let key = key.trim().to_string();
                if out.iter().any(|(k, _)| *k == key) {
                    return Err(Error::Parse(format!("duplicate parameter `{key}`")));
                }
                out.push((key, value.trim().to_string()));
            }
        }
        Ok(Params(out))
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let idx = self.0.iter().position(|(k, _)| k == key)?;
        Some(self.0.remove(idx).1)
    }

    fn take_f64(&mut self, key: &str) -> Result<f64> {
        let raw = self
            .take(key)
            .ok_or_else(|| Error::Parse(format!("missing parameter `{key}`")))?;
        raw.parse::<f64>()
            .map_err(|_| Error::Parse(format!("parameter `{key}`: invalid number `{raw}`")))
    }

    fn take_f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("parameter `{key}`: invalid number `{raw}`"))),
            None => Ok(default),
        }
    }

    fn take_u64(&mut self, key: &str) -> Result<u64> {
        let raw = self
            .take(key)
            .ok_or_else(|| Error::Parse(format!("missing parameter `{key}`")))?;
        raw.parse::<u64>()
            .map_err(|_| Error::Parse(format!("parameter `{key}`: invalid integer `{raw}`")))
    }

    fn finish(self, kind: &str) -> Result<()> {
        if let Some((key, _)) = self.0.first() {
            return Err(Error::Parse(format!("unknown parameter `{key}` for `{kind}`")));
        }
        Ok(())
    }
}

/// Log binomial coefficient via the log-gamma function; exact enough for
/// supports up to about 10^6 without overflow.
fn ln_choose(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Gaussian quantile: inverse-erf start plus one Newton step in CDF space,
/// so that `cdf(quantile(u))` reproduces `u` to near machine precision over
/// the bulk of the distribution. Outside |z| <= 6 the step is skipped; there
/// the density factor already shrinks the CDF-space error far below 1e-9.
fn gaussian_quantile(mu: f64, sigma: f64, u: f64) -> f64 {
    let mut z = SQRT_2 * erf_inv(2.0 * u - 1.0);
    if z.is_finite() && z.abs() <= 6.0 {
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cdf = 0.5 * (1.0 + erf(z / SQRT_2));
        z -= (cdf - u) / pdf;
    }
    mu + sigma * z
}

/// Beta quantile by bisection on the regularized incomplete beta function;
/// converges to the last bit and lands on the smallest point with F(x) >= u.
fn beta_quantile(a: f64, b: f64, u: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return hi;
        }
        if beta_reg(a, b, mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Inverse-transform draw of a geometric trial count: the smallest `g >= 1`
/// with `1 - q^g >= u`, i.e. `ceil(ln(1-u) / ln(q))`.
fn geometric_draw(u: f64, ln_q: f64) -> u64 {
    let g = ((-u).ln_1p() / ln_q).ceil();
    g.max(1.0) as u64
}

/// Forward walk over a discrete support carrying log-mass and cumulative
/// mass. The same walk backs the CDF, the quantile scan, and table
/// construction, so their partial sums agree bit for bit.
pub(crate) struct DiscreteWalk<'a> {
    law: &'a Law,
    /// Current support point.
    pub k: u64,
    /// Log mass at `k`.
    pub lp: f64,
    /// Cumulative mass up to and including `k`.
    pub cum: f64,
    /// Last support point for finite supports.
    pub upper: Option<u64>,
}

impl<'a> DiscreteWalk<'a> {
    pub fn new(law: &'a Law) -> Option<Self> {
        let (lo, upper) = law.discrete_range()?;
        let lp = law.ln_pmf(lo).expect("first support point");
        Some(DiscreteWalk { law, k: lo, lp, cum: lp.exp(), upper })
    }

    /// Mass remaining beyond the current point.
    pub fn tail(&self) -> f64 {
        1.0 - self.cum
    }

    /// Step to the next support point; false once a finite support ends or
    /// the cumulative sum can no longer move.
    pub fn advance(&mut self) -> bool {
        if self.upper.is_some_and(|hi| self.k >= hi) {
            return false;
        }
        let next = self.k + 1;
        let ratio = self.ln_ratio(next);
        let lp_next = self.lp + ratio;
        let bumped = self.cum + lp_next.exp();
        // Past the mode the masses only shrink, so once one of them is too
        // small to register against the cumulative sum, none of the later
        // ones can either: the walk has covered everything representable.
        // Without this stop an unbounded support would spin forever whenever
        // rounding leaves the saturated cumulative short of one.
        if ratio < 0.0 && bumped == self.cum {
            return false;
        }
        self.lp = lp_next;
        self.k = next;
        self.cum = bumped;
        true
    }

    /// `ln(pmf(k) / pmf(k-1))` in closed form, one log-ratio per step.
    fn ln_ratio(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self.law {
            Law::Poisson { lambda } => lambda.ln() - kf.ln(),
            Law::Binomial { n, p } => {
                ((n - k + 1) as f64 / kf).ln() + (p / (1.0 - p)).ln()
            }
            Law::NegBinomial { k: succ, p } => {
                ((kf - 1.0) / (k - succ) as f64).ln() + (1.0 - p).ln()
            }
            Law::Hypergeometric { pop, succ, draws } => {
                let num = (succ - k + 1) as f64 * (draws - k + 1) as f64;
                // k >= draws - (pop - succ), so this difference never underflows.
                let den = kf * (pop - succ + k - draws) as f64;
                (num / den).ln()
            }
            _ => unreachable!("walk only exists for discrete laws"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent quantile oracle: scan the support summing masses computed
    /// point by point from `pdf_or_pmf` (no shared recurrence with the
    /// production walk).
    fn brute_discrete_quantile(law: &Law, u: f64) -> f64 {
        let (lo, hi) = match law.discrete_range() {
            Some(r) => r,
            None => panic!("oracle only covers discrete laws"),
        };
        let mut cum = 0.0;
        let mut k = lo;
        loop {
            cum += law.pdf_or_pmf(k as f64);
            if cum >= u || hi.is_some_and(|h| k >= h) || 1.0 - cum < TAIL_EPS {
                return k as f64;
            }
            k += 1;
        }
    }

    #[test]
    fn binomial_pmf_and_quantile_small_case() {
        let law = Law::binomial(2, 0.5).unwrap();
        // Masses come out of log space, so allow a few ulps of ln_gamma noise.
        assert!((law.pdf_or_pmf(0.0) - 0.25).abs() < 1e-14);
        assert!((law.pdf_or_pmf(1.0) - 0.5).abs() < 1e-14);
        assert!((law.pdf_or_pmf(2.0) - 0.25).abs() < 1e-14);
        assert_eq!(law.pdf_or_pmf(0.5), 0.0);
        assert_eq!(law.pdf_or_pmf(3.0), 0.0);
        // Levels strictly between atoms of the CDF ladder (0.25, 0.75, 1):
        // F(0) = 0.25 < 0.3, so the 0.3-quantile is 1.
        assert_eq!(law.quantile(0.3).unwrap(), 1.0);
        assert_eq!(law.quantile(0.3).unwrap(), brute_discrete_quantile(&law, 0.3));
        assert_eq!(law.quantile(0.2).unwrap(), 0.0);
        assert_eq!(law.quantile(0.9).unwrap(), 2.0);
    }

    #[test]
    fn discrete_quantiles_match_brute_scan() {
        let laws = [
            Law::poisson(3.7).unwrap(),
            Law::binomial(17, 0.3).unwrap(),
            Law::neg_binomial(4, 0.35).unwrap(),
            Law::hypergeometric(30, 12, 10).unwrap(),
        ];
        for law in &laws {
            for i in 1..200 {
                let u = i as f64 / 200.0;
                assert_eq!(
                    law.quantile(u).unwrap(),
                    brute_discrete_quantile(law, u),
                    "{law} at u={u}"
                );
            }
        }
    }

    #[test]
    fn discrete_quantile_terminates_at_the_top_level() {
        // At u = 1 the walk must stop once additions stop registering, even
        // when rounding leaves the saturated cumulative just short of one;
        // sweep intensities so some of them land in that regime.
        for i in 1..=80 {
            let lambda = i as f64 / 10.0;
            let law = Law::poisson(lambda).unwrap();
            let top = law.quantile_u1(1.0);
            assert!(top.is_finite() && top >= lambda.floor());
            assert!(law.cdf(top) > 1.0 - 1e-12, "{law} stopped at {top}");
        }
        for k in 1..6u64 {
            let law = Law::neg_binomial(k, 0.17).unwrap();
            let top = law.quantile_u1(1.0);
            assert!(top.is_finite());
            assert!(law.cdf(top) > 1.0 - 1e-12, "{law} stopped at {top}");
        }
    }

    #[test]
    fn poisson_pmf_closed_form() {
        let law = Law::poisson(1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((law.pdf_or_pmf(0.0) - e).abs() < 1e-15);
        assert!((law.pdf_or_pmf(1.0) - e).abs() < 1e-15);
        assert!((law.pdf_or_pmf(2.0) - e / 2.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_value_cdfs_at_reference_points() {
        let e1 = (-1.0f64).exp();
        assert!((Law::Gumbel.cdf(0.0) - e1).abs() < 1e-15);
        let frechet = Law::frechet(2.0).unwrap();
        assert!((frechet.cdf(1.0) - e1).abs() < 1e-15);
        assert_eq!(frechet.cdf(-0.5), 0.0);
        let weibull = Law::weibull_evt(1.5).unwrap();
        assert!((weibull.cdf(-1.0) - e1).abs() < 1e-15);
        assert_eq!(weibull.cdf(0.0), 1.0);
        assert_eq!(weibull.cdf(2.0), 1.0);
    }

    #[test]
    fn continuous_quantiles_invert_cdf() {
        let laws = [
            Law::Uniform01,
            Law::Exponential1,
            Law::pareto(2.5).unwrap(),
            Law::Gumbel,
            Law::frechet(3.0).unwrap(),
            Law::weibull_evt(2.0).unwrap(),
            Law::gaussian(0.0, 1.0).unwrap(),
            Law::gaussian(-2.0, 4.0).unwrap(),
            Law::beta(2.0, 5.0).unwrap(),
        ];
        for law in &laws {
            for i in 1..500 {
                let u = i as f64 / 500.0;
                let x = law.quantile(u).unwrap();
                assert!(
                    (law.cdf(x) - u).abs() < 1e-9,
                    "{law}: |F(F^-1({u})) - {u}| = {}",
                    (law.cdf(x) - u).abs()
                );
            }
        }
    }

    #[test]
    fn quantile_rejects_endpoints() {
        for u in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(Law::Uniform01.quantile(u), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn charfun_closed_forms() {
        let gauss = Law::gaussian(0.0, 1.0).unwrap();
        let phi = gauss.charfun(1.0).unwrap();
        assert!((phi.re - (-0.5f64).exp()).abs() < 1e-15);
        assert!(phi.im.abs() < 1e-15);

        let exp1 = Law::Exponential1;
        let phi = exp1.charfun(2.0).unwrap();
        // |1/(1-iu)|^2 = 1/(1+u^2)
        assert!((phi.norm_sqr() - 1.0 / 5.0).abs() < 1e-15);

        let uni = Law::Uniform01;
        assert!((uni.charfun(0.0).unwrap().re - 1.0).abs() < 1e-15);
        let phi = uni.charfun(1.0).unwrap();
        assert!((phi.re - 1.0f64.sin()).abs() < 1e-15);
        assert!((phi.im - (1.0 - 1.0f64.cos())).abs() < 1e-15);

        // Binomial cf at u equals (q + p e^{iu})^n; check against a direct
        // product for a small n.
        let binom = Law::binomial(3, 0.3).unwrap();
        let base = Complex64::new(0.7, 0.0) + Complex64::from_polar(0.3, 1.3);
        let expect = base * base * base;
        let got = binom.charfun(1.3).unwrap();
        assert!((got - expect).norm() < 1e-14);

        assert!(matches!(
            Law::pareto(2.0).unwrap().charfun(1.0),
            Err(Error::UnsupportedCharFun(_))
        ));
    }

    #[test]
    fn charfun_modulus_bounded_by_one() {
        let laws = [
            Law::gaussian(1.0, 2.0).unwrap(),
            Law::poisson(4.0).unwrap(),
            Law::binomial(50, 0.2).unwrap(),
            Law::Exponential1,
            Law::Uniform01,
        ];
        for law in &laws {
            for i in -40..=40 {
                let u = i as f64 * 0.25;
                let phi = law.charfun(u).unwrap();
                assert!(phi.norm() <= 1.0 + 1e-12, "{law} at u={u}");
                if u == 0.0 {
                    assert!((phi - Complex64::new(1.0, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn means_and_variances_match_quantile_integrals() {
        // Midpoint integral of F^{-1} over (0,1) as an independent oracle.
        // The quintic smoothstep substitution u = t^3(10 - 15t + 6t^2) grades
        // the mesh toward both endpoints, taming the integrable singularities
        // of heavy-tailed inverses (e.g. (1-u)^{-2/3} for the squared Pareto
        // inverse) that a uniform midpoint rule resolves only at rate m^{-1/3}.
        let cases = [
            Law::Uniform01,
            Law::Exponential1,
            Law::pareto(3.0).unwrap(),
            Law::Gumbel,
            Law::frechet(4.0).unwrap(),
            Law::weibull_evt(2.0).unwrap(),
            Law::gaussian(1.5, 0.25).unwrap(),
            Law::beta(2.0, 3.0).unwrap(),
        ];
        let m = 400_000;
        // Keep nodes far enough inside (0,1) that 2u - 1 stays strictly
        // between -1 and 1 in doubles; the endpoint nodes carry weight
        // O(m^{-3}) each, so the clamp shifts the integral negligibly.
        let (bot, top) = (2f64.powi(-53), 1.0 - 2f64.powi(-53));
        for law in &cases {
            let mut mean = 0.0;
            let mut second = 0.0;
            for i in 0..m {
                let t = (i as f64 + 0.5) / m as f64;
                let u = (t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)).clamp(bot, top);
                let w = 30.0 * t * t * (1.0 - t) * (1.0 - t);
                let x = law.quantile_u1(u);
                mean += x * w;
                second += x * x * w;
            }
            mean /= m as f64;
            second /= m as f64;
            let want_mean = law.mean().unwrap();
            let want_var = law.variance().unwrap();
            assert!(
                (mean - want_mean).abs() < 2e-3 * (1.0 + want_mean.abs()),
                "{law}: mean {mean} vs {want_mean}"
            );
            assert!(
                (second - mean * mean - want_var).abs() < 5e-3 * (1.0 + want_var),
                "{law}: variance {} vs {want_var}",
                second - mean * mean
            );
        }
    }

    #[test]
    fn heavy_tailed_moments_are_none() {
        assert_eq!(Law::pareto(0.5).unwrap().mean(), None);
        assert_eq!(Law::pareto(1.5).unwrap().variance(), None);
        assert_eq!(Law::frechet(0.8).unwrap().mean(), None);
        assert_eq!(Law::frechet(1.5).unwrap().variance(), None);
    }

    #[test]
    fn raw_moments_closed_forms() {
        assert_eq!(Law::Uniform01.raw_moment(2), Some(1.0 / 3.0));
        assert_eq!(Law::Exponential1.raw_moment(3), Some(6.0));
        let gauss = Law::gaussian(2.0, 3.0).unwrap();
        // E[X^4] = mu^4 + 6 mu^2 sigma^2 + 3 sigma^4 = 16 + 72 + 27
        assert!((gauss.raw_moment(4).unwrap() - 115.0).abs() < 1e-10);
        assert_eq!(Law::poisson(1.0).unwrap().raw_moment(2), None);
    }

    #[test]
    fn discrete_cdf_matches_mass_sums_and_caps_at_one() {
        let law = Law::hypergeometric(20, 8, 6).unwrap();
        let mut cum = 0.0;
        for k in 0..=6 {
            cum += law.pdf_or_pmf(k as f64);
            assert!((law.cdf(k as f64) - cum).abs() < 1e-12, "k={k}");
            // Right continuity between integers.
            assert!((law.cdf(k as f64 + 0.5) - cum).abs() < 1e-12);
        }
        assert_eq!(law.cdf(6.0), 1.0);
        assert_eq!(law.cdf(100.0), 1.0);
        assert_eq!(law.cdf(-1.0), 0.0);
        assert_eq!(law.cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn cdf_left_subtracts_the_atom() {
        let law = Law::binomial(4, 0.4).unwrap();
        let at2 = law.cdf(2.0);
        assert!((law.cdf_left(2.0) - (at2 - law.pdf_or_pmf(2.0))).abs() < 1e-15);
        // At non-atoms the left limit equals the cdf.
        assert!((law.cdf_left(2.5) - law.cdf(2.5)).abs() < 1e-15);
        let cont = Law::Exponential1;
        assert_eq!(cont.cdf_left(1.0), cont.cdf(1.0));
    }

    #[test]
    fn negbinomial_support_starts_at_k() {
        let law = Law::neg_binomial(3, 0.5).unwrap();
        assert_eq!(law.pdf_or_pmf(2.0), 0.0);
        assert!((law.pdf_or_pmf(3.0) - 0.125).abs() < 1e-15);
        // pmf(4) = C(3,2) 0.5^3 0.5 = 3/16
        assert!((law.pdf_or_pmf(4.0) - 3.0 / 16.0).abs() < 1e-15);
        assert_eq!(law.support_bounds().0, 3.0);
    }

    #[test]
    fn poisson_truncation_hits_tail_rule() {
        let law = Law::poisson(2.0).unwrap();
        // u extremely close to one lands on the truncated essential sup,
        // a finite support point with negligible mass beyond it.
        let q = law.quantile_u1(1.0);
        assert!(q.is_finite());
        assert!(1.0 - law.cdf(q) < 2.0 * TAIL_EPS);
        assert!(q < 60.0);
    }

    #[test]
    fn parse_round_trips_and_rejects_garbage() {
        let specs = [
            "uniform01",
            "exp1",
            "gumbel",
            "pareto:alpha=2",
            "frechet:alpha=1.5",
            "weibull:beta=2",
            "gauss:mu=0,sigma2=1",
            "beta:a=25,b=26",
            "poisson:lambda=1",
            "binom:n=100,p=0.3",
            "negbinom:k=7,p=0.25",
            "hypergeom:pop=100,succ=40,draws=10",
        ];
        for spec in specs {
            let law = Law::parse(spec).unwrap();
            let rendered = law.to_string();
            assert_eq!(Law::parse(&rendered).unwrap(), law, "{spec} -> {rendered}");
        }
        // Bare gauss defaults to the standard normal.
        assert_eq!(Law::parse("gauss").unwrap(), Law::Gaussian { mu: 0.0, sigma2: 1.0 });

        for bad in [
            "nosuchlaw",
            "pareto",
            "pareto:beta=2",
            "pareto:alpha=2,alpha=3",
            "pareto:alpha=abc",
            "binom:n=1.5,p=0.3",
            "binom:",
            "pareto:alpha",
        ] {
            assert!(matches!(Law::parse(bad), Err(Error::Parse(_))), "{bad}");
        }
        for out_of_range in ["pareto:alpha=0", "binom:n=0,p=0.3", "binom:n=10,p=1", "gauss:mu=0,sigma2=0"] {
            assert!(
                matches!(Law::parse(out_of_range), Err(Error::Domain(_))),
                "{out_of_range}"
            );
        }
    }

    #[test]
    fn geometric_draw_boundaries() {
        let p: f64 = 0.4;
        let ln_q = (1.0f64 - p).ln();
        // u below p must give one trial.
        assert_eq!(geometric_draw(0.39, ln_q), 1);
        // 1 - q^2 = 0.64, so u slightly above 0.64 needs three trials.
        assert_eq!(geometric_draw(0.6401, ln_q), 3);
        assert_eq!(geometric_draw(0.6399, ln_q), 2);
    }
}
