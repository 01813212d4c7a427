//! Distances and empirical summaries: empirical CDFs, Kolmogorov–Smirnov
//! statistics, total variation between discrete laws, sample covariance, and
//! the empirical characteristic function.
//!
//! Total variation is computed on explicit mass tables and satisfies the
//! identity `sup_B |P(B) - Q(B)| = (1/2) sum |p - q|` over the merged
//! support. Tables of laws with infinite support are truncated once the tail
//! mass drops below 1e-15 and keep the truncation remainder; the remainder
//! enters the distance as an upper-bound correction, so reported values never
//! undershoot.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{DiscreteWalk, Law, TAIL_EPS};
use crate::quantile::StepCdf;
use crate::sampling::OrderedSample;

/// Empirical CDF of an ordered sample: jump points at the distinct values,
/// cumulative heights `count/n` (exact, so the top of the ladder is 1.0).
pub fn ecdf(sample: &OrderedSample) -> Result<StepCdf> {
    let n = sample.n();
    if n == 0 {
        return Err(Error::DegenerateSample("empty sample has no empirical CDF".into()));
    }
    let values = sample.values();
    let mut xs = Vec::new();
    let mut cum = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[j] == values[i] {
            j += 1;
        }
        xs.push(values[i]);
        cum.push(j as f64 / n as f64);
        i = j;
    }
    StepCdf::from_cumulative(xs, cum)
}

/// Exact Kolmogorov–Smirnov distance between a sample and a continuous law:
/// `max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)` over the sorted sample.
pub fn ks_distance(sample: &OrderedSample, law: &Law) -> Result<f64> {
    if !law.is_continuous() {
        return Err(Error::ContinuityRequired(format!(
            "KS distance against a sample requires a continuous law, got {}",
            law.kind_name()
        )));
    }
    let n = sample.n();
    if n == 0 {
        return Err(Error::DegenerateSample("empty sample".into()));
    }
    let nf = n as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in sample.values().iter().enumerate() {
        let f = law.cdf(x);
        sup = sup.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok(sup)
}

/// Two-sample Kolmogorov–Smirnov distance: the sup-distance between the two
/// empirical CDFs, evaluated by one merge pass over both sorted samples.
pub fn ks_two_sample(a: &OrderedSample, b: &OrderedSample) -> Result<f64> {
    if a.n() == 0 || b.n() == 0 {
        return Err(Error::DegenerateSample("empty sample".into()));
    }
    let (xs, ys) = (a.values(), b.values());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < xs.len() || j < ys.len() {
        // Process all points tied at the smallest unseen value on both sides.
        let t = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < xs.len() && xs[i] == t {
            i += 1;
        }
        while j < ys.len() && ys[j] == t {
            j += 1;
        }
        sup = sup.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(sup)
}

/// A discrete law as an explicit mass table over a finite, strictly
/// increasing support, plus the mass truncated away (zero for laws whose
/// support is finite to begin with).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLawTable {
    support: Vec<f64>,
    masses: Vec<f64>,
    remainder: f64,
}

impl DiscreteLawTable {
    /// Tabulate a discrete catalog law. Infinite supports are cut once the
    /// tail mass falls below 1e-15; the cut mass is kept as the remainder.
    pub fn from_law(law: &Law) -> Result<Self> {
        let mut walk = DiscreteWalk::new(law).ok_or_else(|| {
            Error::Domain(format!(
                "total variation tables require a discrete law, got {}",
                law.kind_name()
            ))
        })?;
        let mut support = vec![walk.k as f64];
        let mut masses = vec![walk.lp.exp()];
        while walk.tail() >= TAIL_EPS && walk.advance() {
            support.push(walk.k as f64);
            masses.push(walk.lp.exp());
        }
        if walk.upper == Some(walk.k) {
            // A finite support walked to its end is tabulated in full. The
            // log-space start point carries one shared bias factor (large
            // ln_gamma arguments cost ~1e-11 in the exponent), so dividing by
            // the total removes it and the remainder is exactly zero.
            let total: f64 = masses.iter().sum();
            for m in &mut masses {
                *m /= total;
            }
            Self::from_parts(support, masses, 0.0)
        } else {
            Self::from_parts(support, masses, walk.tail().max(0.0))
        }
    }

    /// Build from explicit parts; masses and remainder must be nonnegative
    /// and sum to one within 1e-12, support strictly increasing.
    pub fn from_parts(support: Vec<f64>, masses: Vec<f64>, remainder: f64) -> Result<Self> {
        if support.len() != masses.len() {
            return Err(Error::Shape(format!(
                "{} support points vs {} masses",
                support.len(),
                masses.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::Domain("empty mass table".into()));
        }
        if support.iter().any(|x| !x.is_finite()) || support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("support must be finite and strictly increasing".into()));
        }
        if masses.iter().any(|&m| !(m >= 0.0)) || !(remainder >= 0.0) {
            return Err(Error::Domain("masses must be nonnegative".into()));
        }
        let total: f64 = masses.iter().sum::<f64>() + remainder;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "masses plus remainder must sum to 1 (+-1e-12), got {total}"
            )));
        }
        Ok(DiscreteLawTable { support, masses, remainder })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn remainder(&self) -> f64 {
        self.remainder
    }
}

/// Total variation distance `sup_B |P(B) - Q(B)| = (1/2) sum |p - q|` over
/// the merged support, plus half the truncation remainders as an upper-bound
/// correction for mass that fell outside either table.
pub fn tv_distance(p: &DiscreteLawTable, q: &DiscreteLawTable) -> f64 {
    let (mut i, mut j) = (0usize, 0usize);
    let mut sum = 0.0;
    while i < p.support.len() || j < q.support.len() {
        match (p.support.get(i), q.support.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                sum += (p.masses[i] - q.masses[j]).abs();
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                sum += p.masses[i];
                i += 1;
            }
            (Some(_), Some(_)) => {
                sum += q.masses[j];
                j += 1;
            }
            (Some(_), None) => {
                sum += p.masses[i];
                i += 1;
            }
            (None, Some(_)) => {
                sum += q.masses[j];
                j += 1;
            }
            (None, None) => break,
        }
    }
    // Tables may carry total mass within 1e-12 of one, so the half-sum can
    // overshoot the mathematical ceiling by rounding; clamp it back.
    (0.5 * (sum + p.remainder + q.remainder)).min(1.0)
}

/// Unbiased sample covariance of replicate rows (same length k, at least two
/// rows), returned as a k-by-k matrix.
pub fn empirical_cov(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r < 2 {
        return Err(Error::Shape("covariance needs at least two replicates".into()));
    }
    let k = rows[0].len();
    if k == 0 || rows.iter().any(|row| row.len() != k) {
        return Err(Error::Shape("replicate rows must share a nonzero length".into()));
    }
    let mut mean = vec![0.0; k];
    for row in rows {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= r as f64;
    }
    let mut cov = DMatrix::zeros(k, k);
    for row in rows {
        for a in 0..k {
            let da = row[a] - mean[a];
            for b in a..k {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            let v = cov[(a, b)] / (r as f64 - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Empirical characteristic function `(1/n) sum_j e^{iu x_j}`.
pub fn empirical_cf(sample: &[f64], u: f64) -> Complex64 {
    if sample.is_empty() {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for &x in sample {
        acc += Complex64::from_polar(1.0, u * x);
    }
    acc / sample.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{inverse_transform_ordered, RngStream};

    #[test]
    fn ecdf_merges_ties_exactly() {
        let sample = OrderedSample::from_unsorted(vec![2.0, 1.0, 2.0, 3.0], None).unwrap();
        let step = ecdf(&sample).unwrap();
        assert_eq!(step.jump_points(), &[1.0, 2.0, 3.0]);
        assert_eq!(step.cumulative(), &[0.25, 0.75, 1.0]);
        assert_eq!(step.eval(3.0), 1.0); // exact at the top of the ladder
        assert_eq!(step.eval(0.0), 0.0);
    }

    #[test]
    fn ks_distance_hand_case() {
        // Sample {0.1, 0.2, 0.3} against Uniform01: the largest deviation is
        // 1 - F(0.3) = 0.7 at the top step.
        let sample = OrderedSample::from_unsorted(vec![0.1, 0.2, 0.3], None).unwrap();
        let d = ks_distance(&sample, &Law::Uniform01).unwrap();
        assert!((d - 0.7).abs() < 1e-15);
    }

    #[test]
    fn ks_requires_a_continuous_law() {
        let sample = OrderedSample::from_unsorted(vec![0.5], None).unwrap();
        assert!(matches!(
            ks_distance(&sample, &Law::poisson(1.0).unwrap()),
            Err(Error::ContinuityRequired(_))
        ));
    }

    #[test]
    fn ks_is_small_for_a_true_sample_and_bounded() {
        let mut rng = RngStream::substream(3, 0);
        let law = Law::gaussian(0.0, 1.0).unwrap();
        let sample = inverse_transform_ordered(&law, &mut rng, 4000, "gauss");
        let d = ks_distance(&sample, &law).unwrap();
        assert!(d > 0.0 && d < 0.035, "d = {d}");
        // Against a wildly wrong law it approaches one.
        let wrong = Law::gaussian(100.0, 1.0).unwrap();
        let d = ks_distance(&sample, &wrong).unwrap();
        assert!(d > 0.99 && d <= 1.0);
    }

    #[test]
    fn two_sample_ks_hand_case() {
        // {1, 2} vs {2, 3}: empirical CDFs differ most by 1/2 at t = 1 or 2.
        let a = OrderedSample::from_unsorted(vec![1.0, 2.0], None).unwrap();
        let b = OrderedSample::from_unsorted(vec![2.0, 3.0], None).unwrap();
        assert!((ks_two_sample(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        // Identical samples are at distance zero.
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn tv_two_point_hand_case() {
        let p = DiscreteLawTable::from_parts(vec![0.0, 1.0], vec![0.5, 0.5], 0.0).unwrap();
        let q = DiscreteLawTable::from_parts(vec![0.0, 1.0], vec![0.25, 0.75], 0.0).unwrap();
        assert!((tv_distance(&p, &q) - 0.25).abs() < 1e-15);
        assert_eq!(tv_distance(&p, &p), 0.0);
    }

    #[test]
    fn tv_disjoint_supports_is_one() {
        let p = DiscreteLawTable::from_parts(vec![0.0], vec![1.0], 0.0).unwrap();
        let q = DiscreteLawTable::from_parts(vec![1.0], vec![1.0], 0.0).unwrap();
        assert!((tv_distance(&p, &q) - 1.0).abs() < 1e-15);
    }

    /// Brute-force the supremum over every event of a small joint support.
    fn brute_sup_over_events(p: &DiscreteLawTable, q: &DiscreteLawTable) -> f64 {
        let mut support: Vec<f64> = p.support().iter().chain(q.support()).copied().collect();
        support.sort_by(f64::total_cmp);
        support.dedup();
        assert!(support.len() <= 20, "brute force only for tiny supports");
        let mass = |table: &DiscreteLawTable, x: f64| {
            table
                .support()
                .iter()
                .position(|&s| s == x)
                .map_or(0.0, |idx| table.masses()[idx])
        };
        let mut sup: f64 = 0.0;
        for bits in 0u32..(1 << support.len()) {
            let (mut pp, mut qq) = (0.0, 0.0);
            for (idx, &x) in support.iter().enumerate() {
                if bits >> idx & 1 == 1 {
                    pp += mass(p, x);
                    qq += mass(q, x);
                }
            }
            sup = sup.max((pp - qq).abs());
        }
        sup
    }

    #[test]
    fn tv_equals_event_supremum_on_random_tables() {
        let mut rng = RngStream::substream(17, 0);
        for case in 0..40 {
            let len = 2 + (rng.next_uniform() * 9.0) as usize;
            let mut masses_p: Vec<f64> = (0..len).map(|_| rng.next_uniform()).collect();
            let mut masses_q: Vec<f64> = (0..len).map(|_| rng.next_uniform()).collect();
            let (sp, sq) = (
                masses_p.iter().sum::<f64>(),
                masses_q.iter().sum::<f64>(),
            );
            for m in &mut masses_p {
                *m /= sp;
            }
            for m in &mut masses_q {
                *m /= sq;
            }
            // Renormalize the largest entry so the totals are exactly 1.
            let fix = |masses: &mut Vec<f64>| {
                let total: f64 = masses.iter().sum();
                masses[0] += 1.0 - total;
            };
            fix(&mut masses_p);
            fix(&mut masses_q);
            let support: Vec<f64> = (0..len).map(|i| i as f64).collect();
            let p = DiscreteLawTable::from_parts(support.clone(), masses_p, 0.0).unwrap();
            let q = DiscreteLawTable::from_parts(support, masses_q, 0.0).unwrap();
            let tv = tv_distance(&p, &q);
            let sup = brute_sup_over_events(&p, &q);
            assert!((tv - sup).abs() < 1e-12, "case {case}: tv={tv} sup={sup}");
            assert!((0.0..=1.0).contains(&tv));
        }
    }

    #[test]
    fn tables_from_laws_sum_to_one_and_flag_continuity() {
        let poisson = DiscreteLawTable::from_law(&Law::poisson(4.0).unwrap()).unwrap();
        let total: f64 = poisson.masses().iter().sum::<f64>() + poisson.remainder();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(poisson.remainder() < 1e-13);

        let binom = DiscreteLawTable::from_law(&Law::binomial(30, 0.4).unwrap()).unwrap();
        assert_eq!(binom.remainder(), 0.0);
        assert_eq!(binom.support().len(), 31);

        assert!(DiscreteLawTable::from_law(&Law::Uniform01).is_err());
    }

    #[test]
    fn empirical_cov_basis_pairs() {
        // Rows (1,0) and (0,1): means 1/2, unbiased covariance
        // [[1/2, -1/2], [-1/2, 1/2]].
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let cov = empirical_cov(&rows).unwrap();
        assert!((cov[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((cov[(1, 1)] - 0.5).abs() < 1e-15);
        assert!((cov[(0, 1)] + 0.5).abs() < 1e-15);
        assert!((cov[(1, 0)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn empirical_cov_validates_shape() {
        assert!(empirical_cov(&[vec![1.0]]).is_err());
        assert!(empirical_cov(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(empirical_cov(&[vec![], vec![]]).is_err());
    }

    #[test]
    fn empirical_cf_two_point_case() {
        // Sample {0, pi} at u = 1: (1 + e^{i pi}) / 2 = 0.
        let z = empirical_cf(&[0.0, std::f64::consts::PI], 1.0);
        assert!(z.norm() < 1e-15);
        let one = empirical_cf(&[1.3, -0.4, 7.0], 0.0);
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn empirical_cf_tracks_the_law_cf() {
        let mut rng = RngStream::substream(23, 0);
        let law = Law::Exponential1;
        let sample: Vec<f64> =
            (0..40_000).map(|_| law.quantile(rng.next_uniform()).unwrap()).collect();
        let bound = 3.0 / (sample.len() as f64).sqrt();
        for u in [-2.0, -0.5, 0.7, 1.0, 3.0] {
            let want = law.charfun(u).unwrap();
            let got = empirical_cf(&sample, u);
            assert!(got.norm() <= 1.0 + 1e-12);
            assert!((got - want).norm() < bound, "u={u}: {got} vs {want}");
        }
    }
}
