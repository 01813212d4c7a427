//! Command-line front end for the convergence laboratory.
//!
//! Every subcommand prints exactly one JSON object on stdout. Experiment-style
//! commands (`experiment`, `delta verify`, `fep correlation`) emit a fixed
//! report schema — family, params, sizes, seed, metric, tolerance, pass flag,
//! wall time, version — and exit 0 when the metric beats its tolerance, 1 when
//! it does not. Query-style commands (`quantile`, `sample`, `distance`,
//! `fep fidis`) emit bespoke JSON and exit 0 unless something went wrong.
//!
//! Exit codes: 0 pass, 1 metric above tolerance, 2 malformed invocation,
//! 3 mathematically invalid request, 4 file I/O failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use serde::Serialize;
use serde_json::json;
use vague_core::delta::{builtin_map, mc_delta_verify};
use vague_core::fep::{gamma_cov_exact, run_correlation_experiment, CorrelationKind, Polynomial};
use vague_core::laws::Law;
use vague_core::limits::{
    clt_replicates, default_levy_grid, max_replicates, run_clt_experiment, run_fidis_experiment,
    run_levy_experiment, run_max_experiment, run_multinomial_experiment, CltFamily, EvtFamily,
    FidisFamily, MonteCarloCfg, TvApproxPair,
};
use vague_core::metrics::{ks_distance, tv_distance, DiscreteLawTable};
use vague_core::replicate::configure_thread_pool;
use vague_core::sampling::{OrderedSample, RngStream};

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// What went wrong, bucketed by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed invocation: unparsable law specs, bad flag values.
    Usage(String),
    /// Well-formed command asking for something mathematically invalid.
    Domain(String),
    /// A file could not be read or written.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Io(m) => m,
        }
    }
}

impl From<vague_core::Error> for CliError {
    fn from(e: vague_core::Error) -> Self {
        match e {
            vague_core::Error::Parse(m) => CliError::Usage(m),
            other => CliError::Domain(other.to_string()),
        }
    }
}

/// Fixed-schema result emitted by experiment-style commands.
#[derive(Debug, Serialize)]
pub struct Report {
    pub family: String,
    pub params: serde_json::Value,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub metric_name: String,
    pub metric_value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub wall_ms: u64,
    pub version: String,
}

struct Outcome {
    json: String,
    pass: bool,
}

impl Outcome {
    fn info(value: serde_json::Value) -> Self {
        Outcome { json: value.to_string(), pass: true }
    }

    fn report(report: Report) -> Result<Self, CliError> {
        let json = serde_json::to_string(&report)
            .map_err(|e| CliError::Io(format!("could not serialize the report: {e}")))?;
        Ok(Outcome { json, pass: report.pass })
    }
}

// ---------------------------------------------------------------------------
// Command tree
// ---------------------------------------------------------------------------

fn law_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name("LAW").help(help)
}

fn mc_args(cmd: Command, n: &'static str, reps: &'static str, tol: &'static str) -> Command {
    cmd.arg(
        Arg::new("n")
            .long("n")
            .value_name("N")
            .value_parser(value_parser!(u64))
            .default_value(n)
            .help("Sample size inside each replicate"),
    )
    .arg(
        Arg::new("reps")
            .long("reps")
            .value_name("R")
            .value_parser(value_parser!(u64))
            .default_value(reps)
            .help("Number of replicates"),
    )
    .arg(tol_arg(tol))
}

fn tol_arg(default: &'static str) -> Arg {
    Arg::new("tol")
        .long("tol")
        .value_name("T")
        .value_parser(value_parser!(f64))
        .default_value(default)
        .help("Pass threshold for the reported metric")
}

fn dump_arg() -> Arg {
    Arg::new("dump")
        .long("dump")
        .value_name("PATH")
        .help("Also write the replicate cloud to PATH as CSV")
}

fn p_arg() -> Arg {
    Arg::new("p")
        .long("p")
        .value_name("P")
        .value_parser(value_parser!(f64))
        .default_value("0.5")
        .help("Success probability")
}

pub fn build_cli() -> Command {
    Command::new("vague")
        .version(VERSION)
        .about("Verification laboratory for convergence in law")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("seed")
                .long("seed")
                .value_name("N")
                .value_parser(value_parser!(u64))
                .default_value("0")
                .global(true)
                .help("Master seed for all pseudo-random streams (VAGUE_SEED overrides)"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .value_name("N")
                .value_parser(value_parser!(usize))
                .global(true)
                .help("Worker threads for replicate fan-out (default: all cores)"),
        )
        .subcommand(
            Command::new("quantile")
                .about("Evaluate the generalized inverse of a law")
                .arg(law_arg("law", "Law to invert, as kind:key=value,...").required(true))
                .arg(
                    Arg::new("u")
                        .long("u")
                        .value_name("LEVEL")
                        .value_parser(value_parser!(f64))
                        .action(ArgAction::Append)
                        .required(true)
                        .help("Probability level in (0,1); repeatable"),
                ),
        )
        .subcommand(
            Command::new("sample")
                .about("Draw pseudo-random samples from a law")
                .arg(law_arg("law", "Law to sample, as kind:key=value,...").required(true))
                .arg(
                    Arg::new("n")
                        .long("n")
                        .value_name("N")
                        .value_parser(value_parser!(u64))
                        .default_value("10")
                        .help("Number of draws"),
                )
                .arg(
                    Arg::new("sorted")
                        .long("sorted")
                        .action(ArgAction::SetTrue)
                        .help("Sort the draws ascending before printing"),
                ),
        )
        .subcommand(
            Command::new("distance")
                .about("Measure a distance between laws")
                .subcommand_required(true)
                .arg_required_else_help(true)
                .subcommand(
                    Command::new("tv")
                        .about("Exact total variation between two discrete laws")
                        .arg(law_arg("p", "First discrete law").required(true))
                        .arg(law_arg("q", "Second discrete law").required(true)),
                )
                .subcommand(
                    Command::new("ks")
                        .about("Kolmogorov-Smirnov distance of a sample against a continuous law")
                        .arg(law_arg("from", "Law the sample is drawn from").required(true))
                        .arg(law_arg("to", "Continuous law the sample is tested against").required(true))
                        .arg(
                            Arg::new("n")
                                .long("n")
                                .value_name("N")
                                .value_parser(value_parser!(u64))
                                .default_value("1000")
                                .help("Sample size"),
                        ),
                ),
        )
        .subcommand(experiment_cmd())
        .subcommand(
            Command::new("delta")
                .about("Variance propagation through smooth maps")
                .subcommand_required(true)
                .arg_required_else_help(true)
                .subcommand(
                    mc_args(
                        Command::new("verify")
                            .about("Check a propagated covariance against simulation"),
                        "5000",
                        "10000",
                        "0.1",
                    )
                    .arg(
                        Arg::new("map")
                            .long("map")
                            .value_name("NAME")
                            .value_parser(["square", "inverse", "ratio", "log", "exp"])
                            .required(true)
                            .help("Built-in smooth map to push the mean vector through"),
                    )
                    .arg(
                        law_arg("base", "Base law for one input coordinate; repeat per coordinate")
                            .action(ArgAction::Append)
                            .required(true),
                    ),
                ),
        )
        .subcommand(
            Command::new("fep")
                .about("Functional limits of plug-in statistics")
                .subcommand_required(true)
                .arg_required_else_help(true)
                .subcommand(
                    mc_args(
                        Command::new("correlation")
                            .about("Asymptotic law of the plug-in correlation coefficient"),
                        "2000",
                        "5000",
                        "0.1",
                    )
                    .arg(
                        Arg::new("kind")
                            .long("kind")
                            .value_name("KIND")
                            .value_parser(["gaussian", "independent"])
                            .default_value("gaussian")
                            .help("Pair law: correlated Gaussian or an independent product"),
                    )
                    .arg(
                        Arg::new("rho")
                            .long("rho")
                            .value_name("RHO")
                            .value_parser(value_parser!(f64))
                            .default_value("0.5")
                            .help("True correlation for the gaussian kind"),
                    )
                    .arg(law_arg("x", "First coordinate law for the independent kind"))
                    .arg(law_arg("y", "Second coordinate law for the independent kind")),
                )
                .subcommand(
                    Command::new("fidis")
                        .about("Exact limit covariance of polynomial plug-in statistics")
                        .arg(law_arg("law", "Law the statistics are evaluated under").required(true))
                        .arg(
                            Arg::new("poly")
                                .long("poly")
                                .value_name("COEFFS")
                                .action(ArgAction::Append)
                                .required(true)
                                .help("Polynomial statistic as comma-separated coefficients, lowest degree first; repeatable"),
                        ),
                ),
        )
}

fn experiment_cmd() -> Command {
    Command::new("experiment")
        .about("Run a convergence experiment and report one metric against a tolerance")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            mc_args(
                Command::new("evt-gumbel")
                    .about("Normalized maxima of unit exponentials against the Gumbel limit"),
                "10000",
                "10000",
                "0.02",
            )
            .arg(dump_arg()),
        )
        .subcommand(
            mc_args(
                Command::new("evt-frechet")
                    .about("Normalized maxima of Pareto draws against the Frechet limit"),
                "10000",
                "10000",
                "0.02",
            )
            .arg(
                Arg::new("alpha")
                    .long("alpha")
                    .value_name("A")
                    .value_parser(value_parser!(f64))
                    .default_value("2.0")
                    .help("Pareto tail exponent"),
            )
            .arg(dump_arg()),
        )
        .subcommand(
            mc_args(
                Command::new("evt-weibull")
                    .about("Normalized maxima of uniforms against the Weibull limit"),
                "10000",
                "10000",
                "0.02",
            )
            .arg(dump_arg()),
        )
        .subcommand(
            mc_args(
                Command::new("clt-binomial")
                    .about("Standardized binomial counts against the standard Gaussian"),
                "10000",
                "10000",
                "0.02",
            )
            .arg(p_arg())
            .arg(dump_arg()),
        )
        .subcommand(
            mc_args(
                Command::new("clt-poisson")
                    .about("Standardized Poisson counts against the standard Gaussian"),
                "10000",
                "10000",
                "0.02",
            )
            .arg(dump_arg()),
        )
        .subcommand(
            mc_args(
                Command::new("clt-negbinom")
                    .about("Standardized waiting times for n successes against the Gaussian"),
                "10000",
                "10000",
                "0.02",
            )
            .arg(p_arg())
            .arg(dump_arg()),
        )
        .subcommand(
            mc_args(
                Command::new("clt-iid")
                    .about("Standardized means of iid draws against the standard Gaussian"),
                "10000",
                "10000",
                "0.02",
            )
            .arg(law_arg("law", "Base law; needs finite mean and variance").required(true))
            .arg(dump_arg()),
        )
        .subcommand(
            mc_args(
                Command::new("multinomial")
                    .about("Covariance of standardized multinomial counts against its limit"),
                "500",
                "20000",
                "0.05",
            )
            .arg(
                Arg::new("probs")
                    .long("probs")
                    .value_name("LIST")
                    .default_value("0.2,0.3,0.5")
                    .help("Cell probabilities, comma separated, summing to one"),
            ),
        )
        .subcommand(
            mc_args(
                Command::new("fidis-empirical")
                    .about("Marginal covariances of the uniform empirical process on a grid"),
                "10000",
                "10000",
                "0.02",
            )
            .arg(grid_arg()),
        )
        .subcommand(
            mc_args(
                Command::new("fidis-partialsum")
                    .about("Marginal covariances of standardized partial sums on a grid"),
                "10000",
                "10000",
                "0.05",
            )
            .arg(grid_arg())
            .arg(law_arg("law", "Law of the summands (default: standard Gaussian)").default_value("gauss")),
        )
        .subcommand(
            Command::new("tv-hyp-bin")
                .about("Exact total variation between a hypergeometric law and its binomial limit")
                .arg(u64_arg("pop", "Population size").required(true))
                .arg(u64_arg("succ", "Tagged units in the population").required(true))
                .arg(u64_arg("draws", "Sample size drawn without replacement").required(true))
                .arg(tol_arg("0.02")),
        )
        .subcommand(
            Command::new("tv-bin-poisson")
                .about("Exact total variation between a binomial law and its Poisson limit")
                .arg(
                    Arg::new("n")
                        .long("n")
                        .value_name("N")
                        .value_parser(value_parser!(u64))
                        .default_value("1000")
                        .help("Binomial trial count; the success rate is lambda/n"),
                )
                .arg(
                    Arg::new("lambda")
                        .long("lambda")
                        .value_name("L")
                        .value_parser(value_parser!(u64))
                        .default_value("1")
                        .help("Poisson intensity (integer)"),
                )
                .arg(tol_arg("0.01")),
        )
        .subcommand(
            mc_args(
                Command::new("levy-cf")
                    .about("Empirical characteristic function of a standardized-sum cloud against the Gaussian's"),
                "10000",
                "10000",
                "0.03",
            )
            .arg(
                Arg::new("clt")
                    .long("clt")
                    .value_name("FAMILY")
                    .value_parser(["clt-binomial", "clt-poisson", "clt-negbinom", "clt-iid"])
                    .default_value("clt-binomial")
                    .help("Standardized-sum family supplying the cloud"),
            )
            .arg(p_arg())
            .arg(law_arg("law", "Base law when --clt is clt-iid").default_value("gauss"))
            .arg(
                Arg::new("u")
                    .long("u")
                    .value_name("LIST")
                    .help("Frequency grid, comma separated (default: 10 points spanning [-5,5])"),
            )
            .arg(dump_arg()),
        )
}

fn grid_arg() -> Arg {
    Arg::new("grid")
        .long("grid")
        .value_name("LIST")
        .default_value("0.2,0.5,0.8")
        .help("Time grid in (0,1), comma separated, strictly increasing")
}

fn u64_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name("N").value_parser(value_parser!(u64)).help(help)
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Execute a parsed invocation, print its JSON to `out`, and return the
/// process exit code.
pub fn run(matches: &ArgMatches, out: &mut impl Write) -> i32 {
    match dispatch(matches) {
        Ok(outcome) => {
            if let Err(e) = writeln!(out, "{}", outcome.json) {
                eprintln!("error: could not write the report: {e}");
                return EXIT_IO;
            }
            if outcome.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(matches: &ArgMatches) -> Result<Outcome, CliError> {
    let seed = resolve_seed(matches)?;
    if let Some(&threads) = matches.get_one::<usize>("threads") {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        configure_thread_pool(threads).map_err(CliError::Usage)?;
    }
    match matches.subcommand() {
        Some(("quantile", m)) => Ok(Outcome::info(run_quantile(m)?)),
        Some(("sample", m)) => Ok(Outcome::info(run_sample(m, seed)?)),
        Some(("distance", m)) => {
            let (name, sub) = m.subcommand().expect("distance requires a subcommand");
            Ok(Outcome::info(run_distance(name, sub, seed)?))
        }
        Some(("experiment", m)) => {
            let (name, sub) = m.subcommand().expect("experiment requires a subcommand");
            Outcome::report(run_experiment(name, sub, seed)?)
        }
        Some(("delta", m)) => {
            let (_, sub) = m.subcommand().expect("delta requires a subcommand");
            Outcome::report(run_delta(sub, seed)?)
        }
        Some(("fep", m)) => match m.subcommand().expect("fep requires a subcommand") {
            ("correlation", sub) => Outcome::report(run_fep_correlation(sub, seed)?),
            ("fidis", sub) => Ok(Outcome::info(run_fep_fidis(sub)?)),
            (other, _) => unreachable!("unknown fep subcommand {other}"),
        },
        _ => unreachable!("clap enforces a known subcommand"),
    }
}

/// The master seed: `VAGUE_SEED` from the environment when set, else the
/// `--seed` flag, else zero.
fn resolve_seed(matches: &ArgMatches) -> Result<u64, CliError> {
    match std::env::var("VAGUE_SEED") {
        Ok(raw) => raw.trim().parse::<u64>().map_err(|_| {
            CliError::Usage(format!("VAGUE_SEED must be an unsigned integer, got `{raw}`"))
        }),
        Err(std::env::VarError::NotPresent) => {
            Ok(*matches.get_one::<u64>("seed").expect("seed has a default"))
        }
        Err(std::env::VarError::NotUnicode(_)) => {
            Err(CliError::Usage("VAGUE_SEED must be valid unicode".into()))
        }
    }
}

fn mc_cfg(m: &ArgMatches, seed: u64) -> MonteCarloCfg {
    MonteCarloCfg {
        n: *m.get_one::<u64>("n").expect("n has a default"),
        reps: *m.get_one::<u64>("reps").expect("reps has a default"),
        seed,
    }
}

fn parse_law(m: &ArgMatches, name: &str) -> Result<Law, CliError> {
    let spec = m
        .get_one::<String>(name)
        .ok_or_else(|| CliError::Usage(format!("--{name} is required here")))?;
    Ok(Law::parse(spec)?)
}

fn parse_f64_list(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|_| {
                CliError::Usage(format!(
                    "expected a comma-separated list of numbers, got `{raw}`"
                ))
            })
        })
        .collect()
}

fn write_cloud_csv(path: &str, values: &[f64]) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Io(format!("could not write `{path}`: {e}"));
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "replicate,value").map_err(io_err)?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{v}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

// ---------------------------------------------------------------------------
// Query-style commands
// ---------------------------------------------------------------------------

fn run_quantile(m: &ArgMatches) -> Result<serde_json::Value, CliError> {
    let law = parse_law(m, "law")?;
    let levels: Vec<f64> = m.get_many::<f64>("u").expect("required").copied().collect();
    let mut values = Vec::with_capacity(levels.len());
    for &u in &levels {
        values.push(law.quantile(u)?);
    }
    Ok(json!({ "law": law.to_string(), "u": levels, "quantile": values }))
}

fn run_sample(m: &ArgMatches, seed: u64) -> Result<serde_json::Value, CliError> {
    let law = parse_law(m, "law")?;
    let n = *m.get_one::<u64>("n").expect("n has a default");
    let mut rng = RngStream::substream(seed, 0);
    let mut values: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
    if m.get_flag("sorted") {
        values.sort_by(f64::total_cmp);
    }
    Ok(json!({ "law": law.to_string(), "n": n, "seed": seed, "values": values }))
}

fn run_distance(name: &str, m: &ArgMatches, seed: u64) -> Result<serde_json::Value, CliError> {
    match name {
        "tv" => {
            let p = parse_law(m, "p")?;
            let q = parse_law(m, "q")?;
            let tp = DiscreteLawTable::from_law(&p)?;
            let tq = DiscreteLawTable::from_law(&q)?;
            Ok(json!({
                "metric_name": "tv",
                "p": p.to_string(),
                "q": q.to_string(),
                "value": tv_distance(&tp, &tq),
            }))
        }
        "ks" => {
            let from = parse_law(m, "from")?;
            let to = parse_law(m, "to")?;
            let n = *m.get_one::<u64>("n").expect("n has a default");
            let mut rng = RngStream::substream(seed, 0);
            let values: Vec<f64> = (0..n).map(|_| from.sample(&mut rng)).collect();
            let sample = OrderedSample::from_unsorted(values, None)?;
            let value = ks_distance(&sample, &to)?;
            Ok(json!({
                "metric_name": "ks",
                "from": from.to_string(),
                "to": to.to_string(),
                "n": n,
                "seed": seed,
                "value": value,
            }))
        }
        other => unreachable!("unknown distance {other}"),
    }
}

fn run_fep_fidis(m: &ArgMatches) -> Result<serde_json::Value, CliError> {
    let law = parse_law(m, "law")?;
    let polys = m
        .get_many::<String>("poly")
        .expect("required")
        .map(|s| parse_f64_list(s).and_then(|c| Ok(Polynomial::new(c)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut means = Vec::with_capacity(polys.len());
    for poly in &polys {
        means.push(poly.mean_under(&law)?);
    }
    let cov = gamma_cov_exact(&polys, &law)?;
    let rows: Vec<Vec<f64>> =
        (0..cov.nrows()).map(|i| (0..cov.ncols()).map(|j| cov[(i, j)]).collect()).collect();
    Ok(json!({
        "law": law.to_string(),
        "stats": polys.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "mean": means,
        "cov": rows,
    }))
}

// ---------------------------------------------------------------------------
// Experiment-style commands
// ---------------------------------------------------------------------------

fn clt_family_from(name: &str, m: &ArgMatches) -> Result<(CltFamily, serde_json::Value), CliError> {
    Ok(match name {
        "clt-binomial" => {
            let p = *m.get_one::<f64>("p").expect("p has a default");
            (CltFamily::Binomial { p }, json!({ "p": p }))
        }
        "clt-poisson" => (CltFamily::Poisson, json!({})),
        "clt-negbinom" => {
            let p = *m.get_one::<f64>("p").expect("p has a default");
            (CltFamily::NegBinomial { p }, json!({ "p": p }))
        }
        _ => {
            let law = parse_law(m, "law")?;
            let params = json!({ "law": law.to_string() });
            (CltFamily::IidMean { law }, params)
        }
    })
}

fn run_experiment(name: &str, m: &ArgMatches, seed: u64) -> Result<Report, CliError> {
    let started = Instant::now();
    let tol = *m.get_one::<f64>("tol").expect("tol has a default");
    let (family, params, n, reps, metric_name, metric_value) = match name {
        "evt-gumbel" | "evt-frechet" | "evt-weibull" => {
            let cfg = mc_cfg(m, seed);
            let family = match name {
                "evt-gumbel" => EvtFamily::Exponential,
                "evt-frechet" => {
                    EvtFamily::Pareto { alpha: *m.get_one::<f64>("alpha").expect("default") }
                }
                _ => EvtFamily::Uniform,
            };
            if let Some(path) = m.get_one::<String>("dump") {
                let (cloud, _) = max_replicates(&family, &cfg)?;
                write_cloud_csv(path, &cloud)?;
            }
            let report = run_max_experiment(&family, &cfg)?;
            let params = match family {
                EvtFamily::Pareto { alpha } => {
                    json!({ "alpha": alpha, "quantile_trick": report.quantile_trick })
                }
                _ => json!({ "quantile_trick": report.quantile_trick }),
            };
            (report.family, params, cfg.n, cfg.reps, "ks", report.ks)
        }
        "clt-binomial" | "clt-poisson" | "clt-negbinom" | "clt-iid" => {
            let cfg = mc_cfg(m, seed);
            let (family, params) = clt_family_from(name, m)?;
            if let Some(path) = m.get_one::<String>("dump") {
                let cloud = clt_replicates(&family, &cfg)?;
                write_cloud_csv(path, &cloud)?;
            }
            let report = run_clt_experiment(&family, &cfg)?;
            (report.family, params, cfg.n, cfg.reps, "ks", report.ks)
        }
        "multinomial" => {
            let cfg = mc_cfg(m, seed);
            let probs = parse_f64_list(m.get_one::<String>("probs").expect("default"))?;
            let report = run_multinomial_experiment(&probs, &cfg)?;
            let params = json!({
                "probs": report.probs,
                "null_direction_residual": report.null_direction_residual,
            });
            (
                "multinomial".to_string(),
                params,
                cfg.n,
                cfg.reps,
                "max_abs_cov_error",
                report.max_abs_error,
            )
        }
        "fidis-empirical" | "fidis-partialsum" => {
            let cfg = mc_cfg(m, seed);
            let grid = parse_f64_list(m.get_one::<String>("grid").expect("default"))?;
            let (family, params) = if name == "fidis-empirical" {
                (FidisFamily::UniformEmpirical, json!({ "grid": grid }))
            } else {
                let law = parse_law(m, "law")?;
                let params = json!({ "grid": grid, "law": law.to_string() });
                (FidisFamily::PartialSum { law }, params)
            };
            let report = run_fidis_experiment(&family, &grid, &cfg)?;
            (report.family, params, cfg.n, cfg.reps, "max_abs_cov_error", report.max_abs_error)
        }
        "tv-hyp-bin" => {
            let pop = required_u64(m, "pop")?;
            let succ = required_u64(m, "succ")?;
            let draws = required_u64(m, "draws")?;
            let pair = TvApproxPair::HypergeomBinomial { pop, succ, draws };
            let tv = pair.tv()?;
            let params = json!({ "pop": pop, "succ": succ, "draws": draws });
            (pair.name().to_string(), params, draws, 0, "tv", tv)
        }
        "tv-bin-poisson" => {
            let trials = *m.get_one::<u64>("n").expect("n has a default");
            let lambda = *m.get_one::<u64>("lambda").expect("lambda has a default");
            let pair = TvApproxPair::BinomialPoisson { n: trials, lambda_num: lambda };
            let tv = pair.tv()?;
            (pair.name().to_string(), json!({ "lambda": lambda }), trials, 0, "tv", tv)
        }
        "levy-cf" => {
            let cfg = mc_cfg(m, seed);
            let clt_name = m.get_one::<String>("clt").expect("clt has a default");
            let (family, fam_params) = clt_family_from(clt_name, m)?;
            let grid = match m.get_one::<String>("u") {
                Some(raw) => parse_f64_list(raw)?,
                None => default_levy_grid(),
            };
            if let Some(path) = m.get_one::<String>("dump") {
                let cloud = clt_replicates(&family, &cfg)?;
                write_cloud_csv(path, &cloud)?;
            }
            let report = run_levy_experiment(&family, &cfg, &grid)?;
            let mut params = fam_params;
            let obj = params.as_object_mut().expect("family params are an object");
            obj.insert("clt".into(), json!(clt_name));
            obj.insert("u_grid".into(), json!(report.u_grid));
            (report.family, params, cfg.n, cfg.reps, "sup_cf_gap", report.sup_gap)
        }
        other => unreachable!("unknown experiment {other}"),
    };
    Ok(Report {
        family,
        params,
        n,
        reps,
        seed,
        metric_name: metric_name.to_string(),
        metric_value,
        tolerance: tol,
        pass: metric_value <= tol,
        wall_ms: started.elapsed().as_millis() as u64,
        version: VERSION.to_string(),
    })
}

fn required_u64(m: &ArgMatches, name: &str) -> Result<u64, CliError> {
    m.get_one::<u64>(name)
        .copied()
        .ok_or_else(|| CliError::Usage(format!("--{name} is required here")))
}

fn run_delta(m: &ArgMatches, seed: u64) -> Result<Report, CliError> {
    let started = Instant::now();
    let tol = *m.get_one::<f64>("tol").expect("tol has a default");
    let cfg = mc_cfg(m, seed);
    let map_name = m.get_one::<String>("map").expect("required");
    let map = builtin_map(map_name)?;
    let bases = m
        .get_many::<String>("base")
        .expect("required")
        .map(|s| Law::parse(s))
        .collect::<vague_core::Result<Vec<_>>>()?;
    let report = mc_delta_verify(&map, &bases, &cfg)?;
    Ok(Report {
        family: "delta".to_string(),
        params: json!({
            "map": report.map,
            "bases": bases.iter().map(Law::to_string).collect::<Vec<_>>(),
            "jacobian_gap": report.jacobian_gap,
        }),
        n: cfg.n,
        reps: cfg.reps,
        seed,
        metric_name: "max_rel_error".to_string(),
        metric_value: report.max_rel_error,
        tolerance: tol,
        pass: report.max_rel_error <= tol,
        wall_ms: started.elapsed().as_millis() as u64,
        version: VERSION.to_string(),
    })
}

fn run_fep_correlation(m: &ArgMatches, seed: u64) -> Result<Report, CliError> {
    let started = Instant::now();
    let tol = *m.get_one::<f64>("tol").expect("tol has a default");
    let cfg = mc_cfg(m, seed);
    let kind_name = m.get_one::<String>("kind").expect("kind has a default");
    let (kind, mut params) = if kind_name == "gaussian" {
        let rho = *m.get_one::<f64>("rho").expect("rho has a default");
        (CorrelationKind::GaussianRho { rho }, json!({ "rho": rho }))
    } else {
        let x = parse_law(m, "x")?;
        let y = parse_law(m, "y")?;
        let params = json!({ "x": x.to_string(), "y": y.to_string() });
        (CorrelationKind::IndependentPair { x, y }, params)
    };
    let report = run_correlation_experiment(&kind, &cfg)?;
    let rel = (report.empirical_var - report.predicted_var).abs() / report.predicted_var;
    let obj = params.as_object_mut().expect("params are an object");
    obj.insert("predicted_var".into(), json!(report.predicted_var));
    obj.insert("rejection_rate".into(), json!(report.rejection_rate));
    Ok(Report {
        family: report.kind,
        params,
        n: cfg.n,
        reps: cfg.reps,
        seed,
        metric_name: "rel_var_error".to_string(),
        metric_value: rel,
        tolerance: tol,
        pass: rel <= tol,
        wall_ms: started.elapsed().as_millis() as u64,
        version: VERSION.to_string(),
    })
}
