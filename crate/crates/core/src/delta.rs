//! Variance propagation through smooth maps: if `sqrt(n)(T_n - theta)` has a
//! Gaussian limit with covariance `Sigma`, then `sqrt(n)(g(T_n) - g(theta))`
//! has the Gaussian limit with covariance `J Sigma J^T` for the Jacobian `J`
//! of `g` at `theta`.
//!
//! Maps carry both an evaluator and an analytic Jacobian; the Jacobian is
//! cross-checked against central finite differences before any prediction is
//! trusted, so a map whose derivative is wrong fails loudly instead of
//! producing a confident wrong variance.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::Law;
use crate::limits::MonteCarloCfg;
use crate::metrics::empirical_cov;
use crate::replicate::map_replicates;

type EvalFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;

/// A differentiable map `R^k -> R^m` bundled with its analytic Jacobian.
#[derive(Clone)]
pub struct SmoothMap {
    name: String,
    dim_in: usize,
    dim_out: usize,
    eval: Arc<EvalFn>,
    jacobian: Arc<JacFn>,
}

impl std::fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothMap")
            .field("name", &self.name)
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .finish()
    }
}

impl SmoothMap {
    pub fn new(
        name: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        eval: Arc<EvalFn>,
        jacobian: Arc<JacFn>,
    ) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::Shape("map dimensions must be positive".into()));
        }
        Ok(SmoothMap { name: name.into(), dim_in, dim_out, eval, jacobian })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim_in {
            return Err(Error::Shape(format!(
                "map {} takes {} inputs, got {}",
                self.name,
                self.dim_in,
                x.len()
            )));
        }
        let out = (self.eval)(x)?;
        if out.len() != self.dim_out {
            return Err(Error::Shape(format!(
                "map {} evaluator returned {} outputs, declared {}",
                self.name,
                out.len(),
                self.dim_out
            )));
        }
        Ok(out)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if x.len() != self.dim_in {
            return Err(Error::Shape(format!(
                "map {} takes {} inputs, got {}",
                self.name,
                self.dim_in,
                x.len()
            )));
        }
        let jac = (self.jacobian)(x)?;
        if jac.nrows() != self.dim_out || jac.ncols() != self.dim_in {
            return Err(Error::Shape(format!(
                "map {} Jacobian is {}x{}, declared {}x{}",
                self.name,
                jac.nrows(),
                jac.ncols(),
                self.dim_out,
                self.dim_in
            )));
        }
        Ok(jac)
    }

    /// Largest relative gap between the analytic Jacobian and a central
    /// finite-difference estimate at `x` (entrywise, scaled by 1 + the
    /// analytic magnitude).
    pub fn check_jacobian(&self, x: &[f64]) -> Result<f64> {
        let analytic = self.jacobian(x)?;
        let mut worst: f64 = 0.0;
        let mut lo = x.to_vec();
        let mut hi = x.to_vec();
        for j in 0..self.dim_in {
            let h = 1e-5 * (1.0 + x[j].abs());
            lo[j] = x[j] - h;
            hi[j] = x[j] + h;
            let (f_lo, f_hi) = (self.eval(&lo)?, self.eval(&hi)?);
            for i in 0..self.dim_out {
                let numeric = (f_hi[i] - f_lo[i]) / (2.0 * h);
                let gap = (analytic[(i, j)] - numeric).abs() / (1.0 + analytic[(i, j)].abs());
                worst = worst.max(gap);
            }
            lo[j] = x[j];
            hi[j] = x[j];
        }
        Ok(worst)
    }
}

/// The five ready-made maps: `square`, `inverse`, `ratio`, `log`, `exp`.
pub fn builtin_map(name: &str) -> Result<SmoothMap> {
    let scalar = |name: &str,
                  f: fn(f64) -> Result<f64>,
                  d: fn(f64) -> Result<f64>|
     -> Result<SmoothMap> {
        SmoothMap::new(
            name,
            1,
            1,
            Arc::new(move |x: &[f64]| Ok(vec![f(x[0])?])),
            Arc::new(move |x: &[f64]| Ok(DMatrix::from_element(1, 1, d(x[0])?))),
        )
    };
    match name {
        "square" => scalar("square", |x| Ok(x * x), |x| Ok(2.0 * x)),
        "inverse" => scalar(
            "inverse",
            |x| {
                if x == 0.0 {
                    Err(Error::Domain("inverse is undefined at 0".into()))
                } else {
                    Ok(1.0 / x)
                }
            },
            |x| {
                if x == 0.0 {
                    Err(Error::Domain("inverse is undefined at 0".into()))
                } else {
                    Ok(-1.0 / (x * x))
                }
            },
        ),
        "log" => scalar(
            "log",
            |x| {
                if x > 0.0 {
                    Ok(x.ln())
                } else {
                    Err(Error::Domain("log needs a positive argument".into()))
                }
            },
            |x| {
                if x > 0.0 {
                    Ok(1.0 / x)
                } else {
                    Err(Error::Domain("log needs a positive argument".into()))
                }
            },
        ),
        "exp" => scalar("exp", |x| Ok(x.exp()), |x| Ok(x.exp())),
        "ratio" => SmoothMap::new(
            "ratio",
            2,
            1,
            Arc::new(|x: &[f64]| {
                if x[1] == 0.0 {
                    return Err(Error::Domain("ratio denominator is 0".into()));
                }
                Ok(vec![x[0] / x[1]])
            }),
            Arc::new(|x: &[f64]| {
                if x[1] == 0.0 {
                    return Err(Error::Domain("ratio denominator is 0".into()));
                }
                Ok(DMatrix::from_row_slice(1, 2, &[1.0 / x[1], -x[0] / (x[1] * x[1])]))
            }),
        ),
        other => Err(Error::Parse(format!(
            "unknown map '{other}' (expected square, inverse, ratio, log, or exp)"
        ))),
    }
}

/// Scalar case: limit variance of `sqrt(n)(g(T_n) - g(theta))` from the
/// slope at `theta` and the variance of the underlying limit.
pub fn delta_univariate(slope: f64, variance: f64) -> f64 {
    slope * slope * variance
}

/// Real-valued map of a vector estimate: `grad^T Sigma grad`.
pub fn delta_gradient(grad: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    if !cov.is_square() || grad.len() != cov.nrows() {
        return Err(Error::Shape(format!(
            "gradient of length {} against a {}x{} covariance",
            grad.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let mut acc = 0.0;
    for i in 0..grad.len() {
        for j in 0..grad.len() {
            acc += grad[i] * cov[(i, j)] * grad[j];
        }
    }
    Ok(acc)
}

/// Vector-valued map: `J Sigma J^T`, symmetrized to wash out roundoff.
pub fn delta_jacobian(jac: &DMatrix<f64>, cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() || jac.ncols() != cov.nrows() {
        return Err(Error::Shape(format!(
            "{}x{} Jacobian against a {}x{} covariance",
            jac.nrows(),
            jac.ncols(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let m = jac * cov * jac.transpose();
    Ok((&m + m.transpose()) * 0.5)
}

/// Result of a Monte Carlo check of the propagated covariance: the predicted
/// `J Sigma J^T` against the empirical covariance of
/// `sqrt(n)(g(mean of n draws) - g(theta))` across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub map: String,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub theta: Vec<f64>,
    /// Worst relative gap between the analytic and finite-difference
    /// Jacobian at `theta`.
    pub jacobian_gap: f64,
    pub predicted_cov: Vec<Vec<f64>>,
    pub empirical_cov: Vec<Vec<f64>>,
    pub max_abs_error: f64,
    /// Worst entry error relative to the largest predicted entry.
    pub max_rel_error: f64,
}

/// Gate on how far the analytic Jacobian may stray from finite differences.
const JACOBIAN_GATE: f64 = 1e-6;

/// Verify the propagated covariance by simulation. Each input coordinate is
/// the mean of `cfg.n` iid draws from its base law (coordinates independent),
/// so `theta` is the vector of base means and `Sigma` the diagonal of base
/// variances.
pub fn mc_delta_verify(
    map: &SmoothMap,
    bases: &[Law],
    cfg: &MonteCarloCfg,
) -> Result<DeltaReport> {
    if bases.len() != map.dim_in() {
        return Err(Error::Shape(format!(
            "map {} takes {} inputs, got {} base laws",
            map.name(),
            map.dim_in(),
            bases.len()
        )));
    }
    if cfg.n == 0 || cfg.reps < 2 {
        return Err(Error::Domain("need n >= 1 and reps >= 2".into()));
    }
    let mut theta = Vec::with_capacity(bases.len());
    let mut vars = Vec::with_capacity(bases.len());
    for law in bases {
        theta.push(law.mean().ok_or_else(|| {
            Error::MomentUnavailable(format!("{} has no mean", law.kind_name()))
        })?);
        let v = law.variance().ok_or_else(|| {
            Error::MomentUnavailable(format!("{} has no variance", law.kind_name()))
        })?;
        if v <= 0.0 {
            return Err(Error::Domain("base laws need positive variance".into()));
        }
        vars.push(v);
    }
    let jacobian_gap = map.check_jacobian(&theta)?;
    if jacobian_gap > JACOBIAN_GATE {
        return Err(Error::Domain(format!(
            "map {}: analytic Jacobian disagrees with finite differences at theta (gap {jacobian_gap:.3e})",
            map.name()
        )));
    }
    let jac = map.jacobian(&theta)?;
    let sigma = DMatrix::from_fn(vars.len(), vars.len(), |i, j| {
        if i == j {
            vars[i]
        } else {
            0.0
        }
    });
    let predicted = delta_jacobian(&jac, &sigma)?;
    let g0 = map.eval(&theta)?;

    let nf = cfg.n as f64;
    let rows: Vec<Result<Vec<f64>>> = map_replicates(cfg.seed, cfg.reps, |_, rng| {
        let mut means = Vec::with_capacity(bases.len());
        for law in bases {
            let mut sum = 0.0;
            for _ in 0..cfg.n {
                sum += law.sample(rng);
            }
            means.push(sum / nf);
        }
        let g = map.eval(&means)?;
        Ok(g.iter().zip(&g0).map(|(gi, g0i)| nf.sqrt() * (gi - g0i)).collect())
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    let empirical = empirical_cov(&rows)?;

    let mut max_abs_error: f64 = 0.0;
    for (e, p) in empirical.iter().zip(predicted.iter()) {
        max_abs_error = max_abs_error.max((e - p).abs());
    }
    let scale = predicted.amax();
    let max_rel_error = if scale > 0.0 { max_abs_error / scale } else { max_abs_error };
    Ok(DeltaReport {
        map: map.name().to_string(),
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        theta,
        jacobian_gap,
        predicted_cov: matrix_rows(&predicted),
        empirical_cov: matrix_rows(&empirical),
        max_abs_error,
        max_rel_error,
    })
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngStream;

    #[test]
    fn square_at_one_predicts_four() {
        // g(x) = x^2 at theta = 1 with unit base variance: 2^2 * 1 = 4.
        assert_eq!(delta_univariate(2.0, 1.0), 4.0);
        let cov = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(delta_gradient(&[2.0], &cov).unwrap(), 4.0);
    }

    #[test]
    fn gradient_and_jacobian_agree_for_scalar_maps() {
        let mut rng = RngStream::substream(31, 0);
        let cov_root = DMatrix::from_fn(3, 3, |_, _| rng.next_uniform() - 0.5);
        let cov = &cov_root * cov_root.transpose();
        let grad = [0.7, -1.2, 0.4];
        let jac = DMatrix::from_row_slice(1, 3, &grad);
        let via_grad = delta_gradient(&grad, &cov).unwrap();
        let via_jac = delta_jacobian(&jac, &cov).unwrap()[(0, 0)];
        assert!((via_grad - via_jac).abs() < 1e-12);
    }

    #[test]
    fn propagation_respects_composition() {
        // Propagating through J1 J2 in one step equals propagating through
        // J2 then J1, entrywise to roundoff.
        let mut rng = RngStream::substream(32, 0);
        let j1 = DMatrix::from_fn(2, 3, |_, _| rng.next_uniform() * 2.0 - 1.0);
        let j2 = DMatrix::from_fn(3, 3, |_, _| rng.next_uniform() * 2.0 - 1.0);
        let root = DMatrix::from_fn(3, 3, |_, _| rng.next_uniform() * 2.0 - 1.0);
        let cov = &root * root.transpose();
        let direct = delta_jacobian(&(&j1 * &j2), &cov).unwrap();
        let staged = delta_jacobian(&j1, &delta_jacobian(&j2, &cov).unwrap()).unwrap();
        let gap = (&direct - &staged).amax();
        assert!(gap < 1e-10, "gap = {gap}");
    }

    #[test]
    fn builtins_pass_the_finite_difference_check() {
        for name in ["square", "inverse", "ratio", "log", "exp"] {
            let map = builtin_map(name).unwrap();
            let x: Vec<f64> = match map.dim_in() {
                1 => vec![1.3],
                _ => vec![1.3, 0.8],
            };
            let gap = map.check_jacobian(&x).unwrap();
            assert!(gap < 1e-8, "{name}: gap = {gap}");
        }
        assert!(matches!(builtin_map("nope"), Err(Error::Parse(_))));
    }

    #[test]
    fn builtin_domains_are_enforced() {
        assert!(matches!(builtin_map("inverse").unwrap().eval(&[0.0]), Err(Error::Domain(_))));
        assert!(matches!(builtin_map("log").unwrap().eval(&[-1.0]), Err(Error::Domain(_))));
        assert!(matches!(
            builtin_map("ratio").unwrap().eval(&[1.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(builtin_map("square").unwrap().eval(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn wrong_jacobians_are_rejected() {
        // Evaluator says x^2 but the claimed derivative is 3x.
        let map = SmoothMap::new(
            "liar",
            1,
            1,
            Arc::new(|x: &[f64]| Ok(vec![x[0] * x[0]])),
            Arc::new(|x: &[f64]| Ok(DMatrix::from_element(1, 1, 3.0 * x[0]))),
        )
        .unwrap();
        let cfg = MonteCarloCfg { n: 100, reps: 50, seed: 0 };
        let err = mc_delta_verify(&map, &[Law::Exponential1], &cfg).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "{err}");
    }

    #[test]
    fn monte_carlo_matches_the_square_prediction() {
        let map = builtin_map("square").unwrap();
        let cfg = MonteCarloCfg { n: 2_000, reps: 1_500, seed: 8 };
        let report = mc_delta_verify(&map, &[Law::Exponential1], &cfg).unwrap();
        assert!((report.predicted_cov[0][0] - 4.0).abs() < 1e-12);
        assert!(report.jacobian_gap < 1e-8);
        assert!(report.max_rel_error < 0.15, "rel = {}", report.max_rel_error);
        // Same seed, same report, bit for bit.
        let again = mc_delta_verify(&map, &[Law::Exponential1], &cfg).unwrap();
        assert_eq!(report.empirical_cov[0][0].to_bits(), again.empirical_cov[0][0].to_bits());
    }

    #[test]
    fn momentless_bases_are_rejected() {
        let map = builtin_map("square").unwrap();
        let cfg = MonteCarloCfg { n: 100, reps: 50, seed: 0 };
        let err = mc_delta_verify(&map, &[Law::pareto(1.5).unwrap()], &cfg).unwrap_err();
        assert!(matches!(err, Error::MomentUnavailable(_)));
        let err = mc_delta_verify(&map, &[Law::Exponential1, Law::Uniform01], &cfg).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }
}
