//! Seeded sampling: counter-based substreams, inverse-transform draws, and
//! distributional representations of uniform order statistics.
//!
//! Sampling is built on one primitive: if `U` is uniform on (0,1) then
//! `F^{-1}(U)` has distribution function `F`. Order statistics of n uniforms
//! come either from sorting direct draws or from the ratio representation
//! `(S_1/S_{n+1}, ..., S_n/S_{n+1})` with `S_j` the partial sums of n+1
//! standard exponentials — the two pipelines agree in law, and the ratio
//! vector is independent of the total `S_{n+1}`. Two further maps send
//! uniform order statistics back to iid exponentials: weighted spacings of
//! `-log(1 - U_{i,n})`, and the scaled log-ratios
//! `i log(U_{i+1,n} / U_{i,n})`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::DistributionFunction;

/// A reproducible uniform stream: a master seed selects the generator, a
/// stream index selects one of 2^64 independent substreams of a counter-based
/// generator (ChaCha with per-stream block counters). The same
/// `(master_seed, stream_index)` pair always yields the same sequence,
/// regardless of what other streams are drawn from, which is what makes
/// replicate-parallel runs independent of scheduling.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    master_seed: u64,
    stream_index: u64,
}

impl RngStream {
    /// The substream `stream_index` of the generator seeded by `master_seed`.
    pub fn substream(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        RngStream { rng, master_seed, stream_index }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Next uniform draw, strictly inside (0,1): 53-bit mantissa draws with
    /// the endpoints rejected.
    pub fn next_uniform(&mut self) -> f64 {
        loop {
            let x = (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);
            if x > 0.0 && x < 1.0 {
                return x;
            }
        }
    }
}

/// Where a sample came from: the law specification and the stream that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub law: String,
    pub master_seed: u64,
    pub stream_index: u64,
}

/// A sample stored in ascending order, with optional provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedSample {
    values: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl OrderedSample {
    /// Sort (stable) and wrap. Rejects NaNs; ties are kept.
    pub fn from_unsorted(mut values: Vec<f64>, provenance: Option<Provenance>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("sample contains NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(OrderedSample { values, provenance })
    }

    /// Wrap values already in ascending order (validated).
    pub fn from_sorted(values: Vec<f64>, provenance: Option<Provenance>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("sample contains NaN".into()));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain("values are not sorted ascending".into()));
        }
        Ok(OrderedSample { values, provenance })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// `n` draws of `F^{-1}(U)`, in draw order.
pub fn inverse_transform_sample<D: DistributionFunction + ?Sized>(
    dist: &D,
    rng: &mut RngStream,
    n: usize,
) -> Vec<f64> {
    (0..n).map(|_| dist.quantile_unchecked(rng.next_uniform())).collect()
}

/// `n` draws of `F^{-1}(U)`, sorted, with provenance attached.
pub fn inverse_transform_ordered<D: DistributionFunction + ?Sized>(
    dist: &D,
    rng: &mut RngStream,
    n: usize,
    law_label: impl Into<String>,
) -> OrderedSample {
    let provenance = Provenance {
        law: law_label.into(),
        master_seed: rng.master_seed(),
        stream_index: rng.stream_index(),
    };
    let values = inverse_transform_sample(dist, rng, n);
    OrderedSample::from_unsorted(values, Some(provenance)).expect("inverse transform draws are never NaN")
}

/// Uniform order statistics via the exponential-ratio representation,
/// together with the total `S_{n+1}` (independent of the returned vector).
pub fn renyi_order_stats_with_total(rng: &mut RngStream, n: usize) -> (Vec<f64>, f64) {
    let mut partial = Vec::with_capacity(n);
    let mut sum = 0.0;
    for _ in 0..n {
        sum += -(-rng.next_uniform()).ln_1p();
        partial.push(sum);
    }
    let total = sum + -(-rng.next_uniform()).ln_1p();
    for value in &mut partial {
        *value /= total;
    }
    (partial, total)
}

/// Uniform order statistics `(U_{1,n}, ..., U_{n,n})` drawn in one pass,
/// already sorted, without sorting: partial sums of n+1 standard
/// exponentials divided by their total.
pub fn renyi_order_stats(rng: &mut RngStream, n: usize) -> Vec<f64> {
    renyi_order_stats_with_total(rng, n).0
}

fn check_sorted_open_unit(u_order: &[f64]) -> Result<()> {
    if u_order.is_empty() {
        return Err(Error::DegenerateSample("empty order-statistic vector".into()));
    }
    if u_order.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
        return Err(Error::Domain("order statistics must lie strictly in (0,1)".into()));
    }
    if u_order.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("order statistics must be sorted ascending".into()));
    }
    Ok(())
}

/// Weighted spacings of the exponential transforms of uniform order
/// statistics: with `a_i = -log(1 - U_{i,n})` and `a_0 = 0`, returns
/// `(n - i + 1)(a_i - a_{i-1})` for `i = 1..n` — iid standard exponentials
/// when the input is a uniform order-statistic vector.
pub fn exponential_spacings(u_order: &[f64]) -> Result<Vec<f64>> {
    check_sorted_open_unit(u_order)?;
    let n = u_order.len();
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(n);
    for (i, &u) in u_order.iter().enumerate() {
        let alpha = -(-u).ln_1p();
        out.push((n - i) as f64 * (alpha - prev));
        prev = alpha;
    }
    Ok(out)
}

/// Scaled log-ratios of consecutive uniform order statistics:
/// `i log(U_{i+1,n} / U_{i,n})` for `i = 1..n`, with `U_{n+1,n} = 1` —
/// iid standard exponentials when the input is a uniform order-statistic
/// vector.
pub fn malmquist_ratios(u_order: &[f64]) -> Result<Vec<f64>> {
    check_sorted_open_unit(u_order)?;
    let n = u_order.len();
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let next = if i == n { 1.0 } else { u_order[i] };
        out.push(i as f64 * (next.ln() - u_order[i - 1].ln()));
    }
    Ok(out)
}

/// One row of a quantile-coupling table: the quantiles of a sequence of laws
/// and of their limit, all evaluated at the same uniform level `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub u: f64,
    pub values: Vec<f64>,
    pub limit_value: f64,
}

/// Couple a sequence of laws with its limit on one probability space by
/// evaluating every quantile at the same uniform levels. When the sequence
/// converges weakly, each row converges at every continuity level of the
/// limit quantile — almost-sure convergence of the coupled representatives.
pub fn skorohod_coupling(
    dists: &[&dyn DistributionFunction],
    limit: &dyn DistributionFunction,
    u_grid: &[f64],
) -> Result<Vec<CouplingRow>> {
    if dists.is_empty() || u_grid.is_empty() {
        return Err(Error::Domain("coupling needs at least one law and one level".into()));
    }
    if u_grid.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
        return Err(Error::Domain("coupling levels must lie strictly in (0,1)".into()));
    }
    Ok(u_grid
        .iter()
        .map(|&u| CouplingRow {
            u,
            values: dists.iter().map(|d| d.quantile_unchecked(u)).collect(),
            limit_value: limit.quantile_unchecked(u),
        })
        .collect())
}
