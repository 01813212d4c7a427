//! Generalized-inverse calculus: step distribution functions, quantiles, and
//! epsilon-partitions of the real line.
//!
//! The generalized inverse of a distribution function `F` is
//! `F^{-1}(u) = inf{x : F(x) >= u}`. It is nondecreasing and left-continuous,
//! and it is tied to `F` by the pivot equivalence
//! `F^{-1}(u) <= t  <=>  u <= F(t)`, which everything else in this module
//! leans on. For step CDFs both directions are evaluated by binary search on
//! the same cumulative table, so the equivalence holds exactly in floating
//! point, not just up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real distribution function: CDF, its left limits, its generalized
/// inverse, and the essential bounds of the support.
///
/// `quantile_unchecked` must be valid on (0, 1]; at `u = 1` it returns the
/// essential supremum (possibly infinite, or a truncated last support point
/// for laws with an infinite discrete support).
pub trait DistributionFunction {
    fn cdf(&self, x: f64) -> f64;

    /// Left limit `F(x-) = P(X < x)`.
    fn cdf_left(&self, x: f64) -> f64;

    /// Generalized inverse for `u` in (0, 1]; callers validate the range.
    fn quantile_unchecked(&self, u: f64) -> f64;

    /// Essential infimum and supremum of the law (entries may be infinite).
    fn support(&self) -> (f64, f64);
}

/// A purely atomic distribution function: sorted jump points with cumulative
/// values that end at one (validated to 1e-12).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCdf {
    xs: Vec<f64>,
    cum: Vec<f64>,
}

impl StepCdf {
    /// Build from jump points and their masses. Points must be finite and
    /// strictly increasing, masses nonnegative with total one (within 1e-12).
    pub fn from_masses(xs: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if xs.len() != masses.len() {
            return Err(Error::Shape(format!(
                "{} jump points vs {} masses",
                xs.len(),
                masses.len()
            )));
        }
        if masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::Domain("masses must be nonnegative".into()));
        }
        let mut cum = Vec::with_capacity(masses.len());
        let mut total = 0.0;
        for &m in &masses {
            total += m;
            cum.push(total);
        }
        Self::from_cumulative(xs, cum)
    }

    /// Build from jump points and already-accumulated CDF values (the form
    /// empirical CDFs produce exactly, e.g. counts over n).
    pub fn from_cumulative(xs: Vec<f64>, cum: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Domain("a step CDF needs at least one jump".into()));
        }
        if xs.len() != cum.len() {
            return Err(Error::Shape(format!(
                "{} jump points vs {} cumulative values",
                xs.len(),
                cum.len()
            )));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("jump points must be finite".into()));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("jump points must be strictly increasing".into()));
        }
        if cum.iter().any(|c| !c.is_finite()) || cum.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain("cumulative values must be nondecreasing".into()));
        }
        let last = *cum.last().expect("nonempty");
        if !(cum[0] >= 0.0) || (last - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "cumulative values must rise from >= 0 to 1 (+-1e-12), got final {last}"
            )));
        }
        // Running sums of masses that total one can still overshoot the
        // ceiling by an ulp or two.  The stored heights are the canonical
        // CDF, so pin the top at exactly one and clamp any interior
        // excursion; min() with a constant keeps the sequence nondecreasing.
        let mut cum = cum;
        for c in &mut cum {
            *c = c.min(1.0);
        }
        *cum.last_mut().expect("nonempty") = 1.0;
        Ok(StepCdf { xs, cum })
    }

    pub fn jump_points(&self) -> &[f64] {
        &self.xs
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Mass at each jump point.
    pub fn masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cum
            .iter()
            .map(|&c| {
                let m = c - prev;
                prev = c;
                m
            })
            .collect()
    }

    /// Right-continuous evaluation: the cumulative value of the last jump at
    /// or before `x` (binary search).
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.xs.partition_point(|&t| t <= x);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// Left limit at `x`: the cumulative value strictly before `x`.
    pub fn left_limit(&self, x: f64) -> f64 {
        let idx = self.xs.partition_point(|&t| t < x);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// Generalized inverse `inf{x : F(x) >= u}` for `u` in (0, 1]. At `u = 1`
    /// (or just past the accumulated total, within its 1e-12 slack) this is
    /// the last jump point — the essential supremum.
    pub fn generalized_inverse(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!(
                "generalized inverse requires 0 < u <= 1, got {u}"
            )));
        }
        let idx = self.cum.partition_point(|&c| c < u);
        Ok(if idx == self.xs.len() {
            *self.xs.last().expect("nonempty")
        } else {
            self.xs[idx]
        })
    }
}

impl DistributionFunction for StepCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.left_limit(x)
    }

    fn quantile_unchecked(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0);
        let idx = self.cum.partition_point(|&c| c < u);
        if idx == self.xs.len() {
            *self.xs.last().expect("nonempty")
        } else {
            self.xs[idx]
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("nonempty"))
    }
}

/// Breakpoints `t_0 < t_1 < ... < t_m` such that every open interval
/// `(t_i, t_{i+1})` carries mass at most `eps`: the quantiles of the grid
/// `eps, 2 eps, ...` together with the essential bounds of the support.
/// Duplicate breakpoints produced by flat quantile stretches or atoms are
/// merged, so the output can be as short as a single point.
pub fn epsilon_partition<D: DistributionFunction + ?Sized>(dist: &D, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon partition requires 0 < eps < 1, got {eps}"
        )));
    }
    let k = (1.0 / eps).floor() as u64;
    let (lo, _) = dist.support();
    let mut ts = vec![lo];
    for i in 1..=k {
        ts.push(dist.quantile_unchecked((i as f64 * eps).min(1.0)));
    }
    if (k as f64) * eps < 1.0 {
        ts.push(dist.quantile_unchecked(1.0));
    }
    ts.dedup();
    debug_assert!(ts.windows(2).all(|w| w[0] < w[1]));
    Ok(ts)
}
