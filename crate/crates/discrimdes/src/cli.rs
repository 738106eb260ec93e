//! Command-line front end: JSON problem descriptions in; designs, optimality
//! reports, design polytopes, approximation traces, and simulation tables out.
//!
//! A problem file names the design space, the two rival models, and the
//! criterion, plus optional solver, tolerance, candidate design, simulation,
//! and sweep blocks:
//!
//! ```json
//! {
//!   "design_space": {"lower": -1.0, "upper": 1.0},
//!   "true_model": {"polynomial": {"coefficients": [1.0, 1.0, 0.0, 1.0]}},
//!   "rival": {"basis": {"monomials_upto": 1}},
//!   "criterion": "T"
//! }
//! ```
//!
//! Subcommands: `solve` (optimal design plus its optimality report),
//! `enumerate` (the polytope of all optimal designs), `approx` (best uniform
//! approximation with its iteration trace), `verify` (check a supplied
//! design), `simulate` (power or estimation-error study), and `power-curve`
//! (rejection rate against a swept coefficient).
//!
//! Human-readable tables round to four decimals and go to standard output;
//! `--json OUT` and (for sweeps) `--csv OUT` write machine artifacts that
//! preserve full double precision, with `-` standing for standard output
//! itself. Exit codes: 0 on success, 1 when the request is invalid, 2 when
//! the numerics fail; every failure is mirrored as one-line JSON on standard
//! error.

use std::ffi::OsString;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::approx::{nonlinear_best_approx, remes_exchange, weighted_problem, BestApprox};
use crate::design::{Design, DesignSpace};
use crate::models::{
    Basis, ExpSumModel, Family, FixedMean, GaussianObsModel, NestedPair, Precision,
};
use crate::simulate::{simulate_mse, simulate_power, SimConfig};
use crate::solvers::{
    enumerate_kl_optimal, enumerate_t_optimal, run_ds, run_kl_exchange, run_t_exchange,
    solve_t_chebyshev, verify_ds_optimal, verify_kl_optimal, verify_t_optimal, DesignPolytope,
    ExchangeOpts, ExchangeRun, OptimalityReport, Verdict,
};
use crate::{Error, Result};

/// Default convergence and verification tolerance for design solvers.
const SOLVE_TOL: f64 = 1e-6;

/// Default level tolerance for the approximation trace; tight enough that
/// the final coefficients carry at least ten accurate digits.
const APPROX_TOL: f64 = 1e-11;

/// Iteration cap for the approximation subcommand.
const APPROX_MAX_ITER: usize = 100;

// ---------------------------------------------------------------------------
// problem description schema

/// Parsed problem file.
///
/// `design_space`, `true_model`, `rival`, and `criterion` are always
/// required. `design` supplies the candidate for `verify`, `simulate`, and
/// `power-curve`; `sim` holds Monte Carlo settings; `sweep` names the truth
/// coefficient a `power-curve` run varies. Unknown keys are rejected so that
/// typos surface as errors naming the offending key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub design_space: SpaceSpec,
    pub true_model: ModelSpec,
    pub rival: ModelSpec,
    /// Precision (inverse variance) function of the observations; only
    /// meaningful under the KL criterion, where constant precision recovers
    /// the T criterion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<PrecisionSpec>,
    pub criterion: Criterion,
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Solver convergence and verification tolerance; `--tol` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

/// Design-space block: a closed interval and the candidate-grid resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

/// Tagged model descriptor.
///
/// `polynomial` and `exponential_sum` describe fully determined means and may
/// stand as `true_model`; `basis` and `exponential_sum` describe the rival
/// family (for an exponential rival only the term count and nominal values
/// matter). The length of a polynomial's coefficient list, not its numeric
/// degree, fixes the encompassing model dimension, so trailing zeros keep a
/// tested coefficient addressable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Polynomial { coefficients: Vec<f64> },
    ExponentialSum { terms: Vec<(f64, f64)> },
    Basis { monomials_upto: usize },
}

/// Precision function descriptor: `constant` or `one_minus_x2`, scaled by
/// `value`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionSpec {
    pub kind: PrecisionKind,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionKind {
    Constant,
    OneMinusX2,
}

/// Design criterion: largest least-squares separation (T), its
/// heteroscedastic generalization (KL), or the determinant criteria for
/// testing the extension coefficients (Ds all of them, D1 the first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    T,
    Ds,
    D1,
    #[serde(rename = "KL")]
    Kl,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::T => "T",
            Criterion::Ds => "Ds",
            Criterion::D1 => "D1",
            Criterion::Kl => "KL",
        })
    }
}

/// Solver choice. `auto` prefers the closed-form route when the
/// best-approximation residual pins a unique design and falls back to
/// first-order exchange otherwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Chebyshev,
    Exchange,
    Enumerate,
    #[default]
    Auto,
}

/// Monte Carlo block; `study` picks between a `power` and an `mse` run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default)]
    pub study: Study,
    pub n: usize,
    pub sigma2: f64,
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    #[default]
    Power,
    Mse,
}

/// Candidate design as parallel point and weight lists; the same shape a
/// `solve --json` run emits, so its output can be pasted back in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignInput {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Sweep block for `power-curve`: the flat parameter index of the true model
/// to vary (polynomial: coefficient index; exponential sum: (a1, b1, a2,
/// b4, ...) position) and the values to visit. All sweep points share one
/// seed, so the curve is smoothed by common random numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub coefficient: usize,
    pub values: Vec<f64>,
}

fn default_grid() -> usize {
    1001
}

fn default_seed() -> u64 {
    0
}

fn default_alpha() -> f64 {
    0.05
}

impl ProblemSpec {
    /// Parse a problem description, mapping serde errors (which name the
    /// offending key or variant) onto the validation error class.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::BadSpec {
            reason: format!("problem file: {e}"),
        })
    }

    pub fn space(&self) -> Result<DesignSpace> {
        DesignSpace::new(
            self.design_space.lower,
            self.design_space.upper,
            self.design_space.grid_points,
        )
    }

    /// Observation model for the KL criterion; no precision block means
    /// homoscedastic unit variance.
    pub fn observation_model(&self) -> Result<GaussianObsModel> {
        Ok(GaussianObsModel::new(
            fixed_mean(&self.true_model, "true_model")?,
            self.precision_fn()?,
        ))
    }

    pub fn precision_fn(&self) -> Result<Precision> {
        match self.precision {
            None => Precision::constant(1.0),
            Some(PrecisionSpec {
                kind: PrecisionKind::Constant,
                value,
            }) => Precision::constant(value),
            Some(PrecisionSpec {
                kind: PrecisionKind::OneMinusX2,
                value,
            }) => Precision::one_minus_x2(value),
        }
    }

    /// The candidate design block, validated against the space.
    pub fn candidate_design(&self, space: &DesignSpace) -> Result<Design> {
        let d = self.design.as_ref().ok_or_else(|| Error::BadSpec {
            reason: "design: this command needs a candidate design in the problem file".into(),
        })?;
        Design::new(&d.points, &d.weights, space)
    }

    /// Simulation settings with the command-line seed override applied.
    pub fn sim_config(&self, seed_override: Option<u64>) -> Result<SimConfig> {
        let sim = self.sim.as_ref().ok_or_else(|| Error::BadSpec {
            reason: "sim: this command needs simulation settings in the problem file".into(),
        })?;
        SimConfig::new(
            sim.n,
            sim.sigma2,
            sim.reps,
            seed_override.unwrap_or(sim.seed),
            sim.alpha,
        )
    }
}

// ---------------------------------------------------------------------------
// descriptor -> model translation

/// A fully determined mean from a descriptor; `field` names the key in error
/// messages.
pub fn fixed_mean(model: &ModelSpec, field: &str) -> Result<FixedMean> {
    match model {
        ModelSpec::Polynomial { coefficients } => Ok(FixedMean::Polynomial(coefficients.clone())),
        ModelSpec::ExponentialSum { terms } => {
            Ok(FixedMean::ExpSum(ExpSumModel::new(terms.clone())?))
        }
        ModelSpec::Basis { .. } => Err(Error::BadSpec {
            reason: format!("{field}: a basis spans a family, not a fully determined mean"),
        }),
    }
}

/// The rival family: a monomial basis up to the given degree, or an
/// exponential-sum family with as many terms as the descriptor lists.
pub fn rival_family(model: &ModelSpec) -> Result<Family> {
    match model {
        ModelSpec::Basis { monomials_upto } => Ok(Family::linear(Basis::monomials(
            monomials_upto + 1,
        )?)),
        ModelSpec::ExponentialSum { terms } => {
            // Validating the nominal values catches coincident rates early.
            ExpSumModel::new(terms.clone())?;
            Family::exp_sum(terms.len())
        }
        ModelSpec::Polynomial { .. } => Err(Error::BadSpec {
            reason: "rival: needs a basis or an exponential_sum family, not a fixed polynomial"
                .into(),
        }),
    }
}

/// Nested testing pair for the Ds and D1 criteria and the power studies.
///
/// Polynomial truth with a basis rival forms a nested linear pair: the full
/// model spans as many monomials as the truth has coefficients and the
/// reduced model is the rival basis (D1 instead tests only the leading
/// coefficient). Exponential sums on both sides form a local pair anchored
/// at the true parameters, testing the extension terms (D1: the first
/// extension amplitude alone, one degree of freedom).
pub fn nested_pair(truth: &ModelSpec, rival: &ModelSpec, criterion: Criterion) -> Result<NestedPair> {
    match (truth, rival) {
        (ModelSpec::Polynomial { coefficients }, ModelSpec::Basis { monomials_upto }) => {
            let m1 = coefficients.len();
            let rival_dim = monomials_upto + 1;
            let m2 = match criterion {
                Criterion::D1 => m1.saturating_sub(1),
                _ => rival_dim,
            };
            if m2 == 0 || m2 >= m1 {
                return Err(Error::BadSpec {
                    reason: format!(
                        "true_model: {m1} coefficients cannot extend a rival basis of dimension {m2}"
                    ),
                });
            }
            if rival_dim > m2 {
                return Err(Error::BadSpec {
                    reason: format!(
                        "rival: dimension {rival_dim} does not nest inside the reduced model of dimension {m2}"
                    ),
                });
            }
            let theta0 = DVector::from_column_slice(&coefficients[m2..]);
            NestedPair::linear(Basis::monomials(m1)?, m2, theta0)
        }
        (ModelSpec::ExponentialSum { terms }, ModelSpec::ExponentialSum { terms: reduced }) => {
            let (kf, kr) = (terms.len(), reduced.len());
            if kr >= kf {
                return Err(Error::BadSpec {
                    reason: format!(
                        "rival: {kr} exponential terms do not nest inside a {kf}-term truth"
                    ),
                });
            }
            let family = Family::exp_sum(kf)?;
            let theta = DVector::from_iterator(2 * kf, terms.iter().flat_map(|&(a, b)| [a, b]));
            let tested: Vec<usize> = match criterion {
                Criterion::D1 => vec![2 * kr],
                _ => (2 * kr..2 * kf).collect(),
            };
            NestedPair::local(family, theta, tested)
        }
        _ => Err(Error::BadSpec {
            reason: "nested testing needs a polynomial truth with a basis rival, or \
                     exponential sums on both sides"
                .into(),
        }),
    }
}

/// Encompassing family an estimation-error study fits: every truth
/// coefficient free.
pub fn full_family(truth: &ModelSpec) -> Result<Family> {
    match truth {
        ModelSpec::Polynomial { coefficients } => {
            Ok(Family::linear(Basis::monomials(coefficients.len())?))
        }
        ModelSpec::ExponentialSum { terms } => Family::exp_sum(terms.len()),
        ModelSpec::Basis { .. } => Err(Error::BadSpec {
            reason: "true_model: a basis spans a family, not a fully determined mean".into(),
        }),
    }
}

/// Copy of `model` with flat parameter `index` replaced by `value`.
fn with_coefficient(model: &ModelSpec, index: usize, value: f64) -> Result<ModelSpec> {
    match model {
        ModelSpec::Polynomial { coefficients } => {
            if index >= coefficients.len() {
                return Err(Error::BadSpec {
                    reason: format!(
                        "sweep.coefficient: index {index} out of range for {} coefficients",
                        coefficients.len()
                    ),
                });
            }
            let mut c = coefficients.clone();
            c[index] = value;
            Ok(ModelSpec::Polynomial { coefficients: c })
        }
        ModelSpec::ExponentialSum { terms } => {
            if index >= 2 * terms.len() {
                return Err(Error::BadSpec {
                    reason: format!(
                        "sweep.coefficient: index {index} out of range for {} parameters",
                        2 * terms.len()
                    ),
                });
            }
            let mut t = terms.clone();
            if index % 2 == 0 {
                t[index / 2].0 = value;
            } else {
                t[index / 2].1 = value;
            }
            Ok(ModelSpec::ExponentialSum { terms: t })
        }
        ModelSpec::Basis { .. } => Err(Error::BadSpec {
            reason: "sweep: the true model has no coefficient to vary".into(),
        }),
    }
}

// ---------------------------------------------------------------------------
// command line

#[derive(Parser)]
#[command(
    name = "discrimdes",
    version,
    about = "Optimal designs for discriminating between rival regression models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal design and check it against its criterion.
    Solve(CommonArgs),
    /// Enumerate the polytope of all optimal designs (T and KL criteria).
    Enumerate(CommonArgs),
    /// Best uniform approximation of the true mean by the rival basis,
    /// with the full iteration trace.
    Approx(CommonArgs),
    /// Check the candidate design in the problem file against its criterion.
    Verify(CommonArgs),
    /// Monte Carlo power or estimation-error study for the candidate design.
    Simulate(CommonArgs),
    /// Rejection rate of the discrimination test against a swept coefficient.
    PowerCurve(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::Enumerate(a)
            | Command::Approx(a)
            | Command::Verify(a)
            | Command::Simulate(a)
            | Command::PowerCurve(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Problem description file (JSON).
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,

    /// Write full-precision JSON results to OUT ("-" for standard output).
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,

    /// Write sweep rows as CSV to OUT ("-" for standard output);
    /// power-curve only.
    #[arg(long, value_name = "OUT")]
    csv: Option<PathBuf>,

    /// Replace the master seed of the sim block.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,

    /// Cap the worker threads (default: DISCRIMDES_THREADS, else all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Override the solver and verification tolerance.
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
}

/// Run the command line and return the process exit code: 0 on success, 1
/// when the request is invalid, 2 when the numerics fail. Errors are
/// mirrored as one-line JSON (`{"error": kind, "message": ...}`) on standard
/// error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to standard output and succeed; real
            // parse errors are usage problems.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let args = cli.command.args();
    if let Some(n) = resolved_threads(args.threads)? {
        // The global pool can only be built once per process; a second
        // attempt is harmless because results are identical at any width.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    if args.csv.is_some() && !matches!(cli.command, Command::PowerCurve(_)) {
        return Err(Error::BadSpec {
            reason: "--csv: only power-curve produces sweep rows".into(),
        });
    }
    if let (Some(j), Some(c)) = (&args.json, &args.csv) {
        if is_dash(j) && is_dash(c) {
            return Err(Error::BadSpec {
                reason: "--json and --csv cannot both write to standard output".into(),
            });
        }
    }
    let text = fs::read_to_string(&args.spec).map_err(|e| Error::BadSpec {
        reason: format!("{}: {e}", args.spec.display()),
    })?;
    let spec = ProblemSpec::from_json(&text)?;
    if spec.precision.is_some() && spec.criterion != Criterion::Kl {
        return Err(Error::BadSpec {
            reason: "precision: only the KL criterion weighs the observations".into(),
        });
    }
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, &spec),
        Command::Enumerate(a) => cmd_enumerate(a, &spec),
        Command::Approx(a) => cmd_approx(a, &spec),
        Command::Verify(a) => cmd_verify(a, &spec),
        Command::Simulate(a) => cmd_simulate(a, &spec),
        Command::PowerCurve(a) => cmd_power_curve(a, &spec),
    }
}

/// Thread cap from the flag or the DISCRIMDES_THREADS variable.
fn resolved_threads(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("DISCRIMDES_THREADS") {
            Ok(s) => parse_thread_count(&s)?,
            Err(std::env::VarError::NotPresent) => return Ok(None),
            Err(e) => {
                return Err(Error::BadSpec {
                    reason: format!("DISCRIMDES_THREADS: {e}"),
                })
            }
        },
    };
    if n == 0 {
        return Err(Error::BadSpec {
            reason: "thread cap must be positive".into(),
        });
    }
    Ok(Some(n))
}

fn parse_thread_count(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::BadSpec {
        reason: format!("DISCRIMDES_THREADS: '{s}' is not a thread count"),
    })
}

fn resolve_tol(args: &CommonArgs, spec: &ProblemSpec, fallback: f64) -> f64 {
    args.tol.or(spec.tol).unwrap_or(fallback)
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_solve(args: &CommonArgs, spec: &ProblemSpec) -> Result<()> {
    let space = spec.space()?;
    let tol = resolve_tol(args, spec, SOLVE_TOL);
    let opts = ExchangeOpts {
        tol,
        ..ExchangeOpts::default()
    };
    let (design, iterations, route) = solve_design(spec, &space, &opts)?;
    let design = canonical_design(design, &space)?;
    let report = verify_for(spec, &design, &space, tol)?;

    let mut h = String::new();
    let _ = writeln!(h, "criterion   {}", spec.criterion);
    let _ = writeln!(h, "algorithm   {route}");
    if let Some(it) = iterations {
        let _ = writeln!(h, "iterations  {it}");
    }
    let _ = writeln!(h, "value       {:.6}", report.value);
    let _ = writeln!(h, "design");
    h.push_str(&design_table(&design));
    let _ = writeln!(
        h,
        "optimality  {} (max violation {:.3e}, tol {:.3e})",
        verdict_word(&report.verdict),
        report.max_violation,
        report.tol
    );

    let machine = json!({
        "criterion": spec.criterion.to_string(),
        "algorithm": route,
        "iterations": iterations,
        "design": design,
        "report": report_json(&report),
    });
    finish(args, &h, machine)
}

/// Dispatch on criterion and algorithm; returns the design, the iteration
/// count when an exchange ran, and the route actually taken.
fn solve_design(
    spec: &ProblemSpec,
    space: &DesignSpace,
    opts: &ExchangeOpts,
) -> Result<(Design, Option<usize>, &'static str)> {
    match spec.criterion {
        Criterion::T => {
            let eta = fixed_mean(&spec.true_model, "true_model")?;
            let rival = rival_family(&spec.rival)?;
            match spec.algorithm {
                Algorithm::Chebyshev => {
                    let basis = linear_basis(&rival)?;
                    Ok((solve_t_chebyshev(&eta, basis, space)?, None, "chebyshev"))
                }
                Algorithm::Exchange => {
                    let (d, it) = exchanged(run_t_exchange(&eta, &rival, space, opts)?)?;
                    Ok((d, it, "exchange"))
                }
                Algorithm::Enumerate => Ok((
                    barycenter(&enumerate_t_optimal(&eta, &rival, space)?, space)?,
                    None,
                    "enumerate",
                )),
                Algorithm::Auto => match &rival {
                    Family::Linear(basis) => match solve_t_chebyshev(&eta, basis, space) {
                        Ok(d) => Ok((d, None, "chebyshev")),
                        // A degenerate alternation set means the optimum is
                        // not unique; the exchange still finds one member.
                        Err(Error::WrongAlternationCount { .. }) | Err(Error::NotChebyshev) => {
                            let (d, it) = exchanged(run_t_exchange(&eta, &rival, space, opts)?)?;
                            Ok((d, it, "exchange"))
                        }
                        Err(e) => Err(e),
                    },
                    Family::ExpSum { .. } => {
                        let (d, it) = exchanged(run_t_exchange(&eta, &rival, space, opts)?)?;
                        Ok((d, it, "exchange"))
                    }
                },
            }
        }
        Criterion::Kl => {
            let obs = spec.observation_model()?;
            let rival = rival_family(&spec.rival)?;
            match spec.algorithm {
                Algorithm::Chebyshev => Err(Error::BadSpec {
                    reason: "algorithm: the closed-form route applies to the T criterion only"
                        .into(),
                }),
                Algorithm::Enumerate => Ok((
                    barycenter(&enumerate_kl_optimal(&obs, &rival, space)?, space)?,
                    None,
                    "enumerate",
                )),
                Algorithm::Exchange | Algorithm::Auto => {
                    let (d, it) = exchanged(run_kl_exchange(&obs, &rival, space, opts)?)?;
                    Ok((d, it, "exchange"))
                }
            }
        }
        Criterion::Ds | Criterion::D1 => {
            let pair = nested_pair(&spec.true_model, &spec.rival, spec.criterion)?;
            match spec.algorithm {
                Algorithm::Exchange | Algorithm::Auto => {
                    let s = pair.s();
                    let (d, it) = exchanged(run_ds(&pair, space, s, opts)?)?;
                    Ok((d, it, "exchange"))
                }
                _ => Err(Error::BadSpec {
                    reason: "algorithm: Ds designs come from the exchange algorithm".into(),
                }),
            }
        }
    }
}

fn cmd_enumerate(args: &CommonArgs, spec: &ProblemSpec) -> Result<()> {
    let space = spec.space()?;
    let rival = rival_family(&spec.rival)?;
    let poly = match spec.criterion {
        Criterion::T => {
            enumerate_t_optimal(&fixed_mean(&spec.true_model, "true_model")?, &rival, &space)?
        }
        Criterion::Kl => enumerate_kl_optimal(&spec.observation_model()?, &rival, &space)?,
        _ => {
            return Err(Error::BadSpec {
                reason: "criterion: enumeration applies to the T and KL criteria".into(),
            })
        }
    };

    let mut h = String::new();
    let _ = writeln!(h, "criterion       {}", spec.criterion);
    let _ = writeln!(h, "support        {}", float_row(&poly.support));
    let _ = writeln!(h, "free dimension  {}", poly.free_dimension);
    for (i, v) in poly.vertices.iter().enumerate() {
        let _ = writeln!(h, "vertex {:<2}      {}", i + 1, float_row(v));
    }

    let machine = json!({
        "criterion": spec.criterion.to_string(),
        "support": poly.support,
        "free_dimension": poly.free_dimension,
        "vertices": poly.vertices,
        "constraint_matrix": matrix_rows(&poly),
    });
    finish(args, &h, machine)
}

fn cmd_approx(args: &CommonArgs, spec: &ProblemSpec) -> Result<()> {
    let space = spec.space()?;
    let tol = resolve_tol(args, spec, APPROX_TOL);
    let eta = fixed_mean(&spec.true_model, "true_model")?;
    let rival = rival_family(&spec.rival)?;
    let ba: BestApprox = match (&rival, spec.criterion) {
        (Family::Linear(basis), Criterion::Kl) => {
            let (target, weighted) = weighted_problem(&eta, basis, &spec.precision_fn()?);
            remes_exchange(&target, &weighted, &space, tol, APPROX_MAX_ITER)?
        }
        (Family::Linear(basis), _) => remes_exchange(&eta, basis, &space, tol, APPROX_MAX_ITER)?,
        (Family::ExpSum { .. }, Criterion::Kl) => {
            return Err(Error::BadSpec {
                reason: "rival: the weighted approximation needs a linear rival basis".into(),
            })
        }
        (Family::ExpSum { .. }, _) => nonlinear_best_approx(&eta, &rival, &space, 16)?,
    };

    let mut h = String::new();
    if !ba.trace.is_empty() {
        let _ = writeln!(h, " iter  coefficients | level | reference");
        for (i, step) in ba.trace.iter().enumerate() {
            let _ = writeln!(
                h,
                "{:>5}  {} | {:.4} | {}",
                i + 1,
                float_row(step.theta.as_slice()),
                step.level,
                float_row(&step.reference)
            );
        }
        // Converged state with the full extremal set, which can exceed the
        // working reference when the optimum is degenerate.
        let _ = writeln!(
            h,
            "final  {} | {:.4} | {}",
            float_row(ba.theta_bar.as_slice()),
            ba.sup_error,
            float_row(&ba.extremal_points)
        );
    }
    let _ = writeln!(h, "coefficients  {}", float_row(ba.theta_bar.as_slice()));
    let _ = writeln!(h, "sup error     {:.6}", ba.sup_error);
    let _ = writeln!(h, "extremal      {}", float_row(&ba.extremal_points));
    let _ = writeln!(h, "iterations    {}", ba.iterations);

    let machine = json!({
        "theta_bar": ba.theta_bar.as_slice(),
        "sup_error": ba.sup_error,
        "extremal_points": ba.extremal_points,
        "residual_signs": ba.residual_signs,
        "iterations": ba.iterations,
        "trace": ba.trace.iter().map(|s| json!({
            "theta": s.theta.as_slice(),
            "level": s.level,
            "reference": s.reference,
        })).collect::<Vec<_>>(),
    });
    finish(args, &h, machine)
}

fn cmd_verify(args: &CommonArgs, spec: &ProblemSpec) -> Result<()> {
    let space = spec.space()?;
    let tol = resolve_tol(args, spec, SOLVE_TOL);
    let design = spec.candidate_design(&space)?;
    let report = verify_for(spec, &design, &space, tol)?;

    let mut h = String::new();
    let _ = writeln!(h, "criterion   {}", spec.criterion);
    let _ = writeln!(h, "value       {:.6}", report.value);
    let _ = writeln!(
        h,
        "verdict     {} (max violation {:.3e}, tol {:.3e})",
        verdict_word(&report.verdict),
        report.max_violation,
        report.tol
    );
    let _ = writeln!(h, "{:>10}  {:>8}  {:>10}", "point", "weight", "residual");
    for (i, (x, w)) in design.iter().enumerate() {
        let _ = writeln!(
            h,
            "{x:>10.4}  {w:>8.4}  {:>10.4}",
            report.support_residuals[i]
        );
    }

    let machine = json!({
        "criterion": spec.criterion.to_string(),
        "design": design,
        "report": report_json(&report),
    });
    finish(args, &h, machine)
}

fn cmd_simulate(args: &CommonArgs, spec: &ProblemSpec) -> Result<()> {
    let space = spec.space()?;
    let cfg = spec.sim_config(args.seed)?;
    let design = spec.candidate_design(&space)?;
    let truth = fixed_mean(&spec.true_model, "true_model")?;
    let study = spec.sim.as_ref().map(|s| s.study).unwrap_or_default();

    let report = match study {
        Study::Power => {
            require_testing_criterion(spec.criterion)?;
            let pair = nested_pair(&spec.true_model, &spec.rival, spec.criterion)?;
            simulate_power(&design, &truth, &pair, &cfg)?
        }
        Study::Mse => simulate_mse(&design, &truth, &full_family(&spec.true_model)?, &cfg)?,
    };

    let mut h = String::new();
    let _ = writeln!(
        h,
        "study       {}",
        match study {
            Study::Power => "power",
            Study::Mse => "mse",
        }
    );
    let _ = writeln!(h, "runs        {}   variance {:.4}", cfg.n, cfg.sigma2);
    let _ = writeln!(h, "reps        {}   seed {}", report.reps, report.seed);
    match study {
        Study::Power => {
            let _ = writeln!(
                h,
                "rate        {:.4}  (std error {:.4})",
                report.estimates[0], report.std_errors[0]
            );
        }
        Study::Mse => {
            let labels = parameter_labels(&spec.true_model)?;
            let _ = writeln!(h, "{:>10}  {:>10}  {:>10}", "parameter", "mse", "std error");
            for (i, label) in labels.iter().enumerate() {
                let _ = writeln!(
                    h,
                    "{label:>10}  {:>10.4}  {:>10.4}",
                    report.estimates[i], report.std_errors[i]
                );
            }
        }
    }

    let machine = json!({
        "study": match study { Study::Power => "power", Study::Mse => "mse" },
        "config": cfg,
        "report": report,
    });
    finish(args, &h, machine)
}

fn cmd_power_curve(args: &CommonArgs, spec: &ProblemSpec) -> Result<()> {
    let space = spec.space()?;
    let sweep = spec.sweep.as_ref().ok_or_else(|| Error::BadSpec {
        reason: "sweep: power-curve needs the coefficient index and values to visit".into(),
    })?;
    if spec.sim.as_ref().map(|s| s.study) == Some(Study::Mse) {
        return Err(Error::BadSpec {
            reason: "sim.study: power-curve sweeps the power study".into(),
        });
    }
    require_testing_criterion(spec.criterion)?;
    let cfg = spec.sim_config(args.seed)?;
    let design = spec.candidate_design(&space)?;

    let mut rows = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let truth = with_coefficient(&spec.true_model, sweep.coefficient, value)?;
        let mean = fixed_mean(&truth, "true_model")?;
        let pair = nested_pair(&truth, &spec.rival, spec.criterion)?;
        let report = simulate_power(&design, &mean, &pair, &cfg)?;
        rows.push((value, report.estimates[0], report.std_errors[0]));
    }

    if let Some(path) = &args.csv {
        let mut csv = String::from("value,estimate,std_error\n");
        for &(v, p, se) in &rows {
            let _ = writeln!(csv, "{v:.15e},{p:.15e},{se:.15e}");
        }
        write_artifact(path, &csv)?;
    }

    let mut h = String::new();
    let _ = writeln!(h, "coefficient {}", sweep.coefficient);
    let _ = writeln!(h, "{:>10}  {:>8}  {:>10}", "value", "rate", "std error");
    for &(v, p, se) in &rows {
        let _ = writeln!(h, "{v:>10.4}  {p:>8.4}  {se:>10.4}");
    }

    let machine = json!({
        "coefficient": sweep.coefficient,
        "config": cfg,
        "rows": rows.iter().map(|&(v, p, se)| json!({
            "value": v,
            "estimate": p,
            "std_error": se,
        })).collect::<Vec<_>>(),
    });
    finish(args, &h, machine)
}

// ---------------------------------------------------------------------------
// shared plumbing

fn require_testing_criterion(criterion: Criterion) -> Result<()> {
    match criterion {
        Criterion::Ds | Criterion::D1 => Ok(()),
        _ => Err(Error::BadSpec {
            reason: "criterion: a power study needs the nested-testing criteria Ds or D1".into(),
        }),
    }
}

fn linear_basis(family: &Family) -> Result<&Basis> {
    match family {
        Family::Linear(b) => Ok(b),
        Family::ExpSum { .. } => Err(Error::BadSpec {
            reason: "rival: the closed-form route needs a linear rival basis".into(),
        }),
    }
}

fn exchanged(run: ExchangeRun) -> Result<(Design, Option<usize>)> {
    if !run.converged {
        return Err(Error::NoConvergence {
            iterations: run.iterations,
            gap: run.report.max_violation,
        });
    }
    Ok((run.design, Some(run.iterations)))
}

/// Uniform mixture of the polytope vertices: an interior representative of
/// the optimal face.
fn barycenter(poly: &DesignPolytope, space: &DesignSpace) -> Result<Design> {
    if poly.vertices.is_empty() {
        return Err(Error::EmptyPolytope);
    }
    let k = poly.vertices.len();
    poly.mixture(&vec![1.0 / k as f64; k], space)
}

/// Canonical form whose re-read reconstructs the design bit for bit.
///
/// Re-reading divides the weights by their sum, and a sum one ulp off from
/// one makes that division oscillate forever. Nudging the largest weight
/// until the sum is exactly one turns the division into the identity.
fn canonical_design(design: Design, space: &DesignSpace) -> Result<Design> {
    let design = Design::new(design.points(), design.weights(), space)?;
    let mut weights = design.weights().to_vec();
    for _ in 0..64 {
        let sum: f64 = weights.iter().sum();
        if sum == 1.0 {
            break;
        }
        let k = (0..weights.len())
            .max_by(|&a, &b| weights[a].total_cmp(&weights[b]))
            .expect("nonempty design");
        weights[k] += 1.0 - sum;
    }
    Design::new(design.points(), &weights, space)
}

fn verify_for(
    spec: &ProblemSpec,
    design: &Design,
    space: &DesignSpace,
    tol: f64,
) -> Result<OptimalityReport> {
    match spec.criterion {
        Criterion::T => verify_t_optimal(
            design,
            &fixed_mean(&spec.true_model, "true_model")?,
            &rival_family(&spec.rival)?,
            space,
            tol,
        ),
        Criterion::Kl => verify_kl_optimal(
            design,
            &spec.observation_model()?,
            &rival_family(&spec.rival)?,
            space,
            tol,
        ),
        Criterion::Ds | Criterion::D1 => verify_ds_optimal(
            design,
            &nested_pair(&spec.true_model, &spec.rival, spec.criterion)?,
            space,
            tol,
        ),
    }
}

fn verdict_word(v: &Verdict) -> &'static str {
    match v {
        Verdict::Optimal => "optimal",
        Verdict::Suboptimal => "suboptimal",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn report_json(r: &OptimalityReport) -> serde_json::Value {
    json!({
        "value": r.value,
        "max_violation": r.max_violation,
        "support_residuals": r.support_residuals,
        "verdict": verdict_word(&r.verdict),
        "tol": r.tol,
    })
}

fn matrix_rows(poly: &DesignPolytope) -> Vec<Vec<f64>> {
    poly.constraint_matrix
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

/// Per-parameter labels for the error tables: monomials for a polynomial
/// truth, alternating amplitude and rate names for an exponential sum.
fn parameter_labels(truth: &ModelSpec) -> Result<Vec<String>> {
    match truth {
        ModelSpec::Polynomial { coefficients } => {
            Ok(Basis::monomials(coefficients.len())?.labels().to_vec())
        }
        ModelSpec::ExponentialSum { terms } => Ok((0..terms.len())
            .flat_map(|j| [format!("a{}", j + 1), format!("b{}", j + 1)])
            .collect()),
        ModelSpec::Basis { .. } => Err(Error::BadSpec {
            reason: "true_model: a basis spans a family, not a fully determined mean".into(),
        }),
    }
}

fn design_table(design: &Design) -> String {
    let mut t = format!("{:>10}  {:>8}\n", "point", "weight");
    for (x, w) in design.iter() {
        let _ = writeln!(t, "{x:>10.4}  {w:>8.4}");
    }
    t
}

fn float_row(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_dash(path: &Path) -> bool {
    path.as_os_str() == "-"
}

/// Write `contents` to the path, or to standard output for "-".
fn write_artifact(path: &Path, contents: &str) -> Result<()> {
    if is_dash(path) {
        print!("{contents}");
        Ok(())
    } else {
        fs::write(path, contents).map_err(|e| Error::BadSpec {
            reason: format!("cannot write {}: {e}", path.display()),
        })
    }
}

/// Emit the human table and the machine artifact. When the machine artifact
/// goes to standard output the table is suppressed so the stream stays
/// parseable.
fn finish(args: &CommonArgs, human: &str, machine: serde_json::Value) -> Result<()> {
    let machine_on_stdout = args.json.as_deref().map(is_dash).unwrap_or(false)
        || args.csv.as_deref().map(is_dash).unwrap_or(false);
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&machine).map_err(|e| Error::BadSpec {
            reason: format!("result serialization: {e}"),
        })? + "\n";
        write_artifact(path, &text)?;
    }
    if !machine_on_stdout {
        print!("{human}");
    }
    Ok(())
}
