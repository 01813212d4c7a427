//! Numerical laboratory for checking convergence-in-distribution claims.
//!
//! The crate bundles a catalog of classical laws with exact generalized
//! inverses, inverse-transform sampling on reproducible counter-based RNG
//! substreams, distribution distances (Kolmogorov–Smirnov, total variation),
//! Gaussian limit descriptions for extreme-value and central-limit
//! experiments, delta-method variance propagation, and a small calculus of
//! empirical-process expansions. Every Monte Carlo entry point takes an
//! explicit seed and replays bit-identically, in parallel or serial.

pub mod delta;
pub mod error;
pub mod fep;
pub mod laws;
pub mod limits;
pub mod metrics;
pub mod quantile;
pub mod replicate;
pub mod sampling;

pub use delta::{
    builtin_map, delta_gradient, delta_jacobian, delta_univariate, mc_delta_verify, DeltaReport,
    SmoothMap,
};
pub use error::{Error, Result};
pub use fep::{
    correlation_asymptotic_variance, expansion_product, expansion_quotient, expansion_sum,
    fep_evaluate, fidi_limit, gamma_cov_exact, gamma_cov_sample, plugin_correlation,
    run_correlation_experiment, BivariateMoments, CorrelationKind, CorrelationReport, Expansion,
    GammaEstimate, Polynomial, Statistic,
};
pub use laws::Law;
pub use limits::{
    clt_replicates, default_levy_grid, empirical_process_cov, max_replicates,
    multinomial_clt_covariance, partial_sum_cov, run_clt_experiment, run_fidis_experiment,
    run_levy_experiment, run_max_experiment, run_multinomial_experiment, CltFamily, CltReport,
    EvtFamily, FidisFamily, FidisReport, GaussianLimit, LevyReport, MaxExperimentReport,
    MonteCarloCfg, MultinomialReport, TvApproxPair,
};
pub use metrics::{
    ecdf, empirical_cf, empirical_cov, ks_distance, ks_two_sample, tv_distance, DiscreteLawTable,
};
pub use quantile::{epsilon_partition, DistributionFunction, StepCdf};
pub use replicate::{configure_thread_pool, map_replicates, map_replicates_serial};
pub use sampling::{
    exponential_spacings, inverse_transform_ordered, inverse_transform_sample, malmquist_ratios,
    renyi_order_stats, renyi_order_stats_with_total, skorohod_coupling, CouplingRow,
    OrderedSample, Provenance, RngStream,
};

/// Crate version, embedded in machine-readable reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
