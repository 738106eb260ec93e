//! Monte Carlo validation of designs: level and power of the discrimination
//! tests under a fixed design, and per-parameter mean-squared errors of the
//! least-squares estimates.
//!
//! Every study rounds its design to `n` runs by largest-remainder
//! apportionment ([`Design::round_to`]) and checks that the resulting
//! allocation can identify the fitted model before any data is drawn; a
//! support point whose share rounds to zero runs is dropped from the
//! allocation, which can make an otherwise fine design degenerate for the
//! full model. Replicate r draws its errors from stream r of a ChaCha
//! generator seeded with the master seed, and all aggregation uses
//! fixed-order pairwise summation, so serial and parallel runs of the same
//! [`SimConfig`] produce bit-identical reports.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};
use statrs::function::beta::beta_reg;

use crate::design::Design;
use crate::linalg;
use crate::models::{Basis, Family, FixedMean, NestedPair, ThetaBox};
use crate::{Error, Result};

/// Relative singular-value cutoff below which a model matrix counts as
/// rank-deficient.
const RANK_REL_TOL: f64 = 1e-10;

/// Iteration cap for each nonlinear least-squares start.
const FIT_MAX_ITER: usize = 120;

/// Monte Carlo study settings.
///
/// Validity: at least one run per experiment, positive error variance, at
/// least 100 replications, and a level strictly inside (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Observations per simulated experiment.
    pub n: usize,
    /// Error variance.
    pub sigma2: f64,
    /// Monte Carlo replications.
    pub reps: usize,
    /// Master seed; replicate r draws from stream r derived from it.
    pub seed: u64,
    /// Nominal test level.
    pub alpha: f64,
}

impl SimConfig {
    pub fn new(n: usize, sigma2: f64, reps: usize, seed: u64, alpha: f64) -> Result<Self> {
        let cfg = SimConfig {
            n,
            sigma2,
            reps,
            seed,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::BadSimConfig {
                reason: "need at least one run per experiment".into(),
            });
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::BadSimConfig {
                reason: format!("error variance must be positive, got {}", self.sigma2),
            });
        }
        if self.reps < 100 {
            return Err(Error::BadSimConfig {
                reason: format!(
                    "{} replications give useless Monte Carlo error; need at least 100",
                    self.reps
                ),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::BadSimConfig {
                reason: format!("test level must lie strictly in (0, 1), got {}", self.alpha),
            });
        }
        Ok(())
    }
}

/// Outcome of a simulation study.
///
/// For a power study `estimates` holds the single rejection rate with
/// standard error sqrt(p(1-p)/reps); for an error study it holds one
/// mean-squared error per model parameter with standard errors estimated
/// from the replicate variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Replications aggregated.
    pub reps: usize,
    /// Master seed the replicate streams derive from.
    pub seed: u64,
}

impl SimReport {
    /// The rejection rate of a power study.
    pub fn rejection_rate(&self) -> f64 {
        self.estimates[0]
    }
}

/// Rejection rate of the discrimination test for `pair` when data follow
/// `truth` under `design`.
///
/// Nested linear pairs use the F statistic against the F(m0, n - m1)
/// quantile; exponential pairs use the likelihood-ratio statistic against
/// the chi-square quantile with one degree of freedom per tested
/// coordinate. The likelihood-ratio path seeds the full-model fit with the
/// reduced solution, so the statistic is nonnegative by construction.
///
/// Fails with `DegenerateDesign` when the rounded allocation cannot
/// identify the full model or leaves no residual degrees of freedom.
pub fn simulate_power(
    design: &Design,
    truth: &FixedMean,
    pair: &NestedPair,
    cfg: &SimConfig,
) -> Result<SimReport> {
    cfg.validate()?;
    match pair {
        NestedPair::Linear { full, m2, .. } => {
            let reduced: Vec<usize> = (0..*m2).collect();
            power_f(design, truth, full, &reduced, cfg)
        }
        NestedPair::Local {
            family,
            theta,
            tested,
        } => match family {
            // a local pair over a linear family is still a nested linear
            // hypothesis; the reduced model keeps the untested columns
            Family::Linear(basis) => {
                let reduced: Vec<usize> =
                    (0..basis.len()).filter(|i| !tested.contains(i)).collect();
                power_f(design, truth, basis, &reduced, cfg)
            }
            Family::ExpSum { .. } => power_lr(design, truth, family, theta, tested, cfg),
        },
    }
}

/// Per-parameter mean-squared errors of the least-squares estimates in the
/// full model when data follow `truth` under `design`.
///
/// The true parameter vector is read off `truth`, which must be expressed
/// in the fitted family (a polynomial or pinned linear model for a linear
/// family, an exponential sum with the same number of terms for an
/// exponential family). Linear families are estimated in closed form;
/// exponential families by multi-start least squares anchored at the truth.
/// Exponential terms are exchangeable, so fitted and true parameters are
/// both put in increasing-rate order before errors are taken; otherwise a
/// fit that returns the terms swapped would count as an order-one error
/// despite having identical residuals.
pub fn simulate_mse(
    design: &Design,
    truth: &FixedMean,
    full: &Family,
    cfg: &SimConfig,
) -> Result<SimReport> {
    cfg.validate()?;
    let canonical = matches!(full, Family::ExpSum { .. });
    let mut theta_true = truth_theta(truth, full)?;
    if canonical {
        theta_true = sort_exp_terms(&theta_true);
    }
    let exact = design.round_to(cfg.n)?;
    check_identifiable(exact.points(), full, &theta_true)?;
    let xs = exact.expand();
    let m = full.dim();
    let means: Vec<f64> = xs.iter().map(|&x| truth.eval(x)).collect();
    let sigma = cfg.sigma2.sqrt();
    // closed-form estimator for linear families, multi-start otherwise
    let pinv = match full {
        Family::Linear(basis) => {
            let x = design_matrix(&xs, basis);
            let eps = x.clone().svd(false, false).singular_values.max() * RANK_REL_TOL;
            Some(x.pseudo_inverse(eps).map_err(|e| Error::FitFailure {
                reason: e.into(),
            })?)
        }
        Family::ExpSum { .. } => None,
    };
    let starts = match full {
        Family::ExpSum { .. } => starts_near(
            &theta_true,
            full.bounds().expect("exponential family carries a box"),
        ),
        Family::Linear(_) => Vec::new(),
    };
    let per_rep: Vec<Result<Vec<f64>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(cfg.seed, rep);
            let y = noisy(&means, sigma, &mut rng);
            let theta_hat = match &pinv {
                Some(p) => p * DVector::from_column_slice(&y),
                None => sort_exp_terms(&fit_family(&xs, &y, full, &[], &starts)?.0),
            };
            Ok((0..m)
                .map(|j| {
                    let e = theta_hat[j] - theta_true[j];
                    e * e
                })
                .collect())
        })
        .collect();
    let mut cols: Vec<Vec<f64>> = (0..m).map(|_| Vec::with_capacity(cfg.reps)).collect();
    for rep in per_rep {
        for (col, val) in cols.iter_mut().zip(rep?) {
            col.push(val);
        }
    }
    let reps = cfg.reps as f64;
    let estimates: Vec<f64> = cols
        .iter()
        .map(|c| linalg::pairwise_sum(c) / reps)
        .collect();
    let std_errors: Vec<f64> = cols
        .iter()
        .zip(&estimates)
        .map(|(c, &mean)| {
            let sq: Vec<f64> = c.iter().map(|&v| (v - mean) * (v - mean)).collect();
            (linalg::pairwise_sum(&sq) / (reps * (reps - 1.0))).sqrt()
        })
        .collect();
    Ok(SimReport {
        estimates,
        std_errors,
        reps: cfg.reps,
        seed: cfg.seed,
    })
}

/// Nested-linear F statistic ((RSS_r - RSS_f)/m0) / (RSS_f/(n - m1)) for
/// testing the reduced model inside the full one; the reference quantile is
/// F(m0, n - m1).
///
/// Data that both models fit to rounding error yield exactly 0. Fails with
/// `DegenerateDesign` when the full-model matrix is rank-deficient or there
/// are no residual degrees of freedom.
pub fn f_statistic(xs: &[f64], ys: &[f64], reduced: &Basis, full: &Basis) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::BadModel {
            reason: "x and y data must have equal nonzero length".into(),
        });
    }
    let (m1, m2) = (full.len(), reduced.len());
    if m2 >= m1 {
        return Err(Error::BadModel {
            reason: format!(
                "reduced model ({m2} terms) must be smaller than the full model ({m1} terms)"
            ),
        });
    }
    if xs.len() <= m1 {
        return Err(Error::DegenerateDesign {
            reason: format!(
                "{} observations leave no residual degrees of freedom for {m1} coefficients",
                xs.len()
            ),
        });
    }
    let y = DVector::from_column_slice(ys);
    let (_, rss_f) = lsq_matrix(&design_matrix(xs, full), &y)?;
    let (_, rss_r) = lsq_matrix(&design_matrix(xs, reduced), &y)?;
    Ok(f_from_rss(rss_r, rss_f, m1 - m2, xs.len() - m1, y.norm_squared()))
}

/// Likelihood-ratio statistic n log(RSS_reduced / RSS_full) with the error
/// variance profiled out; the reference quantile is chi-square with one
/// degree of freedom per tested coordinate.
///
/// Nested fits can tie to rounding error, so the statistic is clamped at 0;
/// a reduced fit that beats the full fit beyond rounding means the fits are
/// not nested and is reported as a failure.
pub fn lr_statistic(rss_reduced: f64, rss_full: f64, n: usize) -> Result<f64> {
    if n == 0
        || !rss_reduced.is_finite()
        || !rss_full.is_finite()
        || rss_reduced < 0.0
        || rss_full < 0.0
    {
        return Err(Error::FitFailure {
            reason: format!("invalid residual sums ({rss_reduced:.3e}, {rss_full:.3e})"),
        });
    }
    if rss_reduced < rss_full * (1.0 - 1e-9) {
        return Err(Error::FitFailure {
            reason: format!(
                "reduced fit beat the full fit ({rss_reduced:.6e} < {rss_full:.6e}); the fits are not nested"
            ),
        });
    }
    if rss_full == 0.0 {
        return Ok(if rss_reduced == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((n as f64) * (rss_reduced / rss_full).ln().max(0.0))
}

/// p-quantile of the F distribution with `d1`, `d2` degrees of freedom.
pub fn f_quantile(d1: usize, d2: usize, p: f64) -> Result<f64> {
    if d1 == 0 || d2 == 0 || !(p > 0.0 && p < 1.0) {
        return Err(Error::BadSimConfig {
            reason: format!("invalid F quantile request ({d1}, {d2}, {p})"),
        });
    }
    let dist =
        FisherSnedecor::new(d1 as f64, d2 as f64).map_err(|e| Error::BadSimConfig {
            reason: e.to_string(),
        })?;
    Ok(dist.inverse_cdf(p))
}

/// p-quantile of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_quantile(df: usize, p: f64) -> Result<f64> {
    if df == 0 || !(p > 0.0 && p < 1.0) {
        return Err(Error::BadSimConfig {
            reason: format!("invalid chi-square quantile request ({df}, {p})"),
        });
    }
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::BadSimConfig {
        reason: e.to_string(),
    })?;
    Ok(dist.inverse_cdf(p))
}

/// Upper tail P(F > x) of the noncentral F distribution with `d1`, `d2`
/// degrees of freedom and noncentrality `lambda`.
///
/// Evaluated as the Poisson mixture of regularized incomplete beta terms,
/// truncated once the accumulated Poisson mass reaches 1 - 1e-13; accurate
/// for lambda up to roughly 1e3.
pub fn noncentral_f_tail(d1: usize, d2: usize, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let (a, b) = (d1 as f64 / 2.0, d2 as f64 / 2.0);
    let u = d1 as f64 * x / (d1 as f64 * x + d2 as f64);
    let half = lambda.max(0.0) / 2.0;
    let mut weight = (-half).exp();
    let mut total = weight;
    let mut cdf = weight * beta_reg(a, b, u);
    let mut j = 0usize;
    while total < 1.0 - 1e-13 && j < 100_000 {
        j += 1;
        weight *= half / j as f64;
        total += weight;
        cdf += weight * beta_reg(a + j as f64, b, u);
    }
    (1.0 - cdf).clamp(0.0, 1.0)
}

/// F-test rejection rate: `reduced_cols` lists the full-basis columns the
/// reduced model keeps.
fn power_f(
    design: &Design,
    truth: &FixedMean,
    full: &Basis,
    reduced_cols: &[usize],
    cfg: &SimConfig,
) -> Result<SimReport> {
    let m1 = full.len();
    let m0 = m1 - reduced_cols.len();
    let exact = design.round_to(cfg.n)?;
    check_identifiable(
        exact.points(),
        &Family::linear(full.clone()),
        &DVector::zeros(m1),
    )?;
    if cfg.n <= m1 {
        return Err(Error::DegenerateDesign {
            reason: format!(
                "{} runs leave no residual degrees of freedom for {m1} coefficients",
                cfg.n
            ),
        });
    }
    let df2 = cfg.n - m1;
    let cutoff = f_quantile(m0, df2, 1.0 - cfg.alpha)?;
    let xs = exact.expand();
    let xf = design_matrix(&xs, full);
    let qf = thin_q(&xf);
    let qr = thin_q(&xf.select_columns(reduced_cols.iter()));
    let means: Vec<f64> = xs.iter().map(|&x| truth.eval(x)).collect();
    let sigma = cfg.sigma2.sqrt();
    let hits: Vec<f64> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(cfg.seed, rep);
            let y = DVector::from_vec(noisy(&means, sigma, &mut rng));
            let rss_f = projection_rss(&qf, &y);
            let rss_r = projection_rss(&qr, &y);
            let stat = f_from_rss(rss_r, rss_f, m0, df2, y.norm_squared());
            if stat > cutoff {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(rate_report(&hits, cfg))
}

/// Likelihood-ratio rejection rate for an exponential family with the
/// `tested` coordinates zeroed under the submodel.
fn power_lr(
    design: &Design,
    truth: &FixedMean,
    family: &Family,
    theta_ref: &DVector<f64>,
    tested: &[usize],
    cfg: &SimConfig,
) -> Result<SimReport> {
    let m1 = family.dim();
    let exact = design.round_to(cfg.n)?;
    check_identifiable(exact.points(), family, theta_ref)?;
    if cfg.n <= m1 {
        return Err(Error::DegenerateDesign {
            reason: format!(
                "{} runs leave no residual degrees of freedom for {m1} parameters",
                cfg.n
            ),
        });
    }
    let cutoff = chi2_quantile(tested.len(), 1.0 - cfg.alpha)?;
    let bounds = family.bounds().expect("exponential family carries a box");
    let mut theta_null = theta_ref.clone();
    for &i in tested {
        theta_null[i] = 0.0;
    }
    let red_starts = starts_near(&theta_null, bounds);
    let full_starts = starts_near(theta_ref, bounds);
    let xs = exact.expand();
    let means: Vec<f64> = xs.iter().map(|&x| truth.eval(x)).collect();
    let sigma = cfg.sigma2.sqrt();
    let stats: Vec<Result<f64>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(cfg.seed, rep);
            let y = noisy(&means, sigma, &mut rng);
            let (theta_red, rss_r) = fit_family(&xs, &y, family, tested, &red_starts)?;
            // the reduced optimum as an extra start keeps the fits nested
            let mut starts = full_starts.clone();
            starts.push(theta_red);
            let (_, rss_f) = fit_family(&xs, &y, family, &[], &starts)?;
            let stat = lr_statistic(rss_r, rss_f, cfg.n)?;
            Ok(if stat > cutoff { 1.0 } else { 0.0 })
        })
        .collect();
    let mut hits = Vec::with_capacity(cfg.reps);
    for s in stats {
        hits.push(s?);
    }
    Ok(rate_report(&hits, cfg))
}

fn rate_report(hits: &[f64], cfg: &SimConfig) -> SimReport {
    let reps = cfg.reps as f64;
    let p = linalg::pairwise_sum(hits) / reps;
    let se = (p * (1.0 - p) / reps).sqrt();
    SimReport {
        estimates: vec![p],
        std_errors: vec![se],
        reps: cfg.reps,
        seed: cfg.seed,
    }
}

/// Error stream for one replicate: same master seed, per-replicate stream,
/// so any execution order sees identical draws.
fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn noisy(means: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    means
        .iter()
        .map(|&m| m + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn design_matrix(xs: &[f64], basis: &Basis) -> DMatrix<f64> {
    let m = basis.len();
    let mut x = DMatrix::zeros(xs.len(), m);
    for (i, &xi) in xs.iter().enumerate() {
        let f = basis.eval(xi);
        for j in 0..m {
            x[(i, j)] = f[j];
        }
    }
    x
}

/// The allocation identifies the model iff the parameter-gradient matrix on
/// the distinct run locations has full column rank.
fn check_identifiable(points: &[f64], family: &Family, theta: &DVector<f64>) -> Result<()> {
    let m = family.dim();
    let mut g = DMatrix::zeros(points.len(), m);
    for (i, &x) in points.iter().enumerate() {
        let row = family.gradient(theta, x)?;
        for j in 0..m {
            g[(i, j)] = row[j];
        }
    }
    let sv = g.svd(false, false).singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > smax * RANK_REL_TOL).count();
    if rank < m {
        return Err(Error::DegenerateDesign {
            reason: format!(
                "allocation has {} distinct points but estimating all {m} parameters needs a rank-{m} gradient matrix (got rank {rank})",
                points.len()
            ),
        });
    }
    Ok(())
}

/// Least squares against an explicit matrix; fails on rank deficiency.
fn lsq_matrix(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let m = x.ncols();
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > smax * RANK_REL_TOL)
        .count();
    if rank < m {
        return Err(Error::DegenerateDesign {
            reason: format!("regression matrix has rank {rank}, cannot estimate {m} coefficients"),
        });
    }
    let theta = svd
        .solve(y, smax * RANK_REL_TOL)
        .map_err(|e| Error::FitFailure { reason: e.into() })?;
    let rss = (y - x * &theta).norm_squared();
    Ok((theta, rss))
}

/// Orthonormal basis of the column space; callers must have checked rank.
fn thin_q(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().qr().q()
}

fn projection_rss(q: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let r = y - q * (q.transpose() * y);
    r.norm_squared()
}

/// F value from the two residual sums. `scale` is the squared data norm;
/// residual sums at rounding level relative to it count as exact fits, which
/// keeps noise-free data from turning 0/0 into garbage.
fn f_from_rss(rss_r: f64, rss_f: f64, m0: usize, df2: usize, scale: f64) -> f64 {
    let tiny = 1e-24 * scale.max(f64::MIN_POSITIVE);
    let num = ((rss_r - rss_f) / m0 as f64).max(0.0);
    if rss_f <= tiny {
        return if num <= tiny { 0.0 } else { f64::INFINITY };
    }
    num / (rss_f / df2 as f64)
}

/// Deterministic multi-start seeds: the anchor, three jittered copies, and
/// four low-discrepancy points from the box, all clamped to the box.
fn starts_near(anchor: &DVector<f64>, bounds: &ThetaBox) -> Vec<DVector<f64>> {
    let dim = anchor.len();
    let step = DVector::from_iterator(
        dim,
        bounds
            .lower()
            .iter()
            .zip(bounds.upper())
            .map(|(&lo, &hi)| 0.1 * (hi - lo).min(4.0)),
    );
    let flip = DVector::from_iterator(dim, (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }));
    let mut starts = vec![
        bounds.clamp(anchor),
        bounds.clamp(&(anchor + step.component_mul(&flip))),
        bounds.clamp(&(anchor - step.component_mul(&flip))),
        bounds.clamp(&(anchor * 0.75)),
    ];
    starts.extend(bounds.halton_points(4));
    starts
}

/// Best-of-multistart least squares of the family to the data, with the
/// `frozen` coordinates pinned at zero. Returns (theta_hat, rss).
fn fit_family(
    xs: &[f64],
    ys: &[f64],
    family: &Family,
    frozen: &[usize],
    starts: &[DVector<f64>],
) -> Result<(DVector<f64>, f64)> {
    let m = family.dim();
    let free: Vec<usize> = (0..m).filter(|i| !frozen.contains(i)).collect();
    let embed = |v: &DVector<f64>| {
        let mut theta = DVector::zeros(m);
        for (j, &i) in free.iter().enumerate() {
            theta[i] = v[j];
        }
        theta
    };
    match family {
        Family::Linear(basis) => {
            let x = design_matrix(xs, basis).select_columns(free.iter());
            let (t, rss) = lsq_matrix(&x, &DVector::from_column_slice(ys))?;
            Ok((embed(&t), rss))
        }
        Family::ExpSum { .. } => {
            let bounds = family.bounds().expect("exponential family carries a box");
            let lo: Vec<f64> = free.iter().map(|&i| bounds.lower()[i]).collect();
            let hi: Vec<f64> = free.iter().map(|&i| bounds.upper()[i]).collect();
            let resid = |v: &DVector<f64>| {
                let theta = embed(v);
                DVector::from_iterator(
                    xs.len(),
                    xs.iter()
                        .zip(ys)
                        .map(|(&x, &y)| y - family.eval(&theta, x).expect("dimension fixed")),
                )
            };
            let jac = |v: &DVector<f64>| {
                let theta = embed(v);
                let mut jm = DMatrix::zeros(xs.len(), free.len());
                for (r, &x) in xs.iter().enumerate() {
                    let g = family.gradient(&theta, x).expect("dimension fixed");
                    for (c, &i) in free.iter().enumerate() {
                        jm[(r, c)] = -g[i];
                    }
                }
                jm
            };
            let mut best: Option<(DVector<f64>, f64)> = None;
            for s in starts {
                let sfree = DVector::from_iterator(free.len(), free.iter().map(|&i| s[i]));
                let (t, rss) =
                    linalg::levenberg_marquardt(&resid, &jac, &sfree, &lo, &hi, FIT_MAX_ITER);
                if rss.is_finite() && best.as_ref().map_or(true, |b| rss < b.1) {
                    best = Some((embed(&t), rss));
                }
            }
            best.ok_or_else(|| Error::FitFailure {
                reason: "no start produced a finite residual sum".into(),
            })
        }
    }
}

/// Exponential terms in increasing-rate order, (a, b) pairs kept together.
fn sort_exp_terms(theta: &DVector<f64>) -> DVector<f64> {
    let k = theta.len() / 2;
    let mut terms: Vec<(f64, f64)> = (0..k).map(|j| (theta[2 * j], theta[2 * j + 1])).collect();
    terms.sort_by(|p, q| p.1.total_cmp(&q.1));
    DVector::from_iterator(2 * k, terms.into_iter().flat_map(|(a, b)| [a, b]))
}

/// True parameter vector of `truth` in the family's parameterization.
fn truth_theta(truth: &FixedMean, full: &Family) -> Result<DVector<f64>> {
    match (truth, full) {
        (FixedMean::Polynomial(c), Family::Linear(basis)) => {
            let monos = Basis::monomials(basis.len())?;
            if basis.labels() != monos.labels() {
                return Err(Error::BadModel {
                    reason: "polynomial truth needs a monomial fitting basis".into(),
                });
            }
            if c.len() > basis.len() {
                return Err(Error::BadModel {
                    reason: format!(
                        "true polynomial has {} coefficients but the fitted basis only {}",
                        c.len(),
                        basis.len()
                    ),
                });
            }
            let mut theta = DVector::zeros(basis.len());
            for (i, &ci) in c.iter().enumerate() {
                theta[i] = ci;
            }
            Ok(theta)
        }
        (FixedMean::Linear(model), Family::Linear(basis)) => {
            if model.basis().labels() != basis.labels() {
                return Err(Error::BadModel {
                    reason: "truth and fitted model use different bases".into(),
                });
            }
            model.theta().cloned().ok_or_else(|| Error::BadModel {
                reason: "fixed linear truth carries no coefficient vector".into(),
            })
        }
        (FixedMean::ExpSum(model), Family::ExpSum { terms, .. }) => {
            if model.k() != *terms {
                return Err(Error::BadModel {
                    reason: format!(
                        "truth has {} exponential terms, the fitted family {terms}",
                        model.k()
                    ),
                });
            }
            Ok(model.theta())
        }
        _ => Err(Error::BadModel {
            reason: "per-parameter errors need the truth expressed in the fitted family".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria;
    use crate::design::DesignSpace;
    use crate::models::ExpSumModel;

    fn space() -> DesignSpace {
        DesignSpace::new(-1.0, 1.0, 1001).unwrap()
    }

    fn cubic_pair() -> NestedPair {
        NestedPair::linear(
            Basis::monomials(4).unwrap(),
            2,
            DVector::from_vec(vec![0.0, 1.0]),
        )
        .unwrap()
    }

    /// Determinant-ratio design for the linear-vs-cubic problem.
    fn d2_design() -> Design {
        let s = 1.0 / 6.0_f64.sqrt();
        Design::new(&[-1.0, -s, s, 1.0], &[0.2, 0.3, 0.3, 0.2], &space()).unwrap()
    }

    /// Three-point minimax design plus 2% of the mass at the fourth point.
    fn modified_t16() -> Design {
        Design::new(
            &[-1.0, -0.5, 0.5, 1.0],
            &[0.02, 0.98 / 6.0, 0.98 * 0.5, 0.98 / 3.0],
            &space(),
        )
        .unwrap()
    }

    fn t13() -> Design {
        Design::new(
            &[-1.0, -0.5, 0.5, 1.0],
            &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            &space(),
        )
        .unwrap()
    }

    #[test]
    fn config_rejects_bad_fields() {
        assert!(matches!(
            SimConfig::new(0, 0.1, 1000, 1, 0.05),
            Err(Error::BadSimConfig { .. })
        ));
        assert!(matches!(
            SimConfig::new(50, 0.0, 1000, 1, 0.05),
            Err(Error::BadSimConfig { .. })
        ));
        assert!(matches!(
            SimConfig::new(50, 0.1, 99, 1, 0.05),
            Err(Error::BadSimConfig { .. })
        ));
        assert!(matches!(
            SimConfig::new(50, 0.1, 1000, 1, 1.0),
            Err(Error::BadSimConfig { .. })
        ));
        assert!(SimConfig::new(50, 0.1, 100, 1, 0.05).is_ok());
    }

    #[test]
    fn f_statistic_matches_hand_arithmetic() {
        // two runs at each of -1, 0, 1; the slope-1 line through mean 5/3
        // leaves RSS 16/3, the constant fit leaves 28/3, so with one tested
        // coefficient and four residual degrees of freedom F = 3 exactly
        let xs = [-1.0, -1.0, 0.0, 0.0, 1.0, 1.0];
        let ys = [0.0, 2.0, 1.0, 1.0, 2.0, 4.0];
        let f = f_statistic(
            &xs,
            &ys,
            &Basis::monomials(1).unwrap(),
            &Basis::monomials(2).unwrap(),
        )
        .unwrap();
        assert!((f - 3.0).abs() < 1e-12, "F = {f}");
    }

    #[test]
    fn f_statistic_is_zero_on_exact_submodel_data() {
        let xs = [-1.0, -1.0, 0.0, 0.0, 1.0, 1.0];
        let ys = [2.0; 6];
        let f = f_statistic(
            &xs,
            &ys,
            &Basis::monomials(1).unwrap(),
            &Basis::monomials(2).unwrap(),
        )
        .unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn f_statistic_rejects_rank_deficient_data() {
        let xs = [1.0; 6];
        let ys = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            f_statistic(
                &xs,
                &ys,
                &Basis::monomials(1).unwrap(),
                &Basis::monomials(2).unwrap()
            ),
            Err(Error::DegenerateDesign { .. })
        ));
    }

    #[test]
    fn lr_statistic_handles_ties_and_failures() {
        assert_eq!(lr_statistic(5.0, 5.0, 50).unwrap(), 0.0);
        // rounding-level inversion clamps to zero
        assert_eq!(lr_statistic(5.0 * (1.0 - 1e-14), 5.0, 50).unwrap(), 0.0);
        assert!(lr_statistic(10.0, 5.0, 50).unwrap() > 0.0);
        assert!(matches!(
            lr_statistic(1.0, 5.0, 50),
            Err(Error::FitFailure { .. })
        ));
        assert!(matches!(
            lr_statistic(f64::NAN, 5.0, 50),
            Err(Error::FitFailure { .. })
        ));
    }

    #[test]
    fn quantiles_match_known_values() {
        // one degree of freedom: square of the standard normal 97.5% point
        assert!((chi2_quantile(1, 0.95).unwrap() - 3.841_458_820_694_124).abs() < 1e-9);
        // two degrees of freedom: exponential with mean 2
        assert!((chi2_quantile(2, 0.95).unwrap() - (-2.0 * 0.05_f64.ln())).abs() < 1e-10);
        let q = f_quantile(2, 46, 0.95).unwrap();
        let dist = FisherSnedecor::new(2.0, 46.0).unwrap();
        assert!((dist.cdf(q) - 0.95).abs() < 1e-8);
        assert!(matches!(
            f_quantile(0, 46, 0.95),
            Err(Error::BadSimConfig { .. })
        ));
    }

    #[test]
    fn noncentral_tail_reduces_to_central_and_grows_with_noncentrality() {
        let dist = FisherSnedecor::new(2.0, 46.0).unwrap();
        for &x in &[0.5, 1.0, 2.0, 4.0] {
            let tail = noncentral_f_tail(2, 46, 0.0, x);
            assert!((tail - (1.0 - dist.cdf(x))).abs() < 1e-10, "x = {x}");
        }
        let mut last = 0.0;
        for &l in &[0.0, 1.0, 5.0, 20.0, 100.0] {
            let tail = noncentral_f_tail(2, 46, l, 3.2);
            assert!(tail >= last);
            last = tail;
        }
        assert_eq!(noncentral_f_tail(2, 46, 1.0, 0.0), 1.0);
    }

    #[test]
    fn f_test_level_is_near_nominal_under_the_submodel() {
        let truth = FixedMean::polynomial(vec![1.0, 1.0]);
        let cfg = SimConfig::new(50, 0.1, 1000, 20_240_501, 0.05).unwrap();
        let report = simulate_power(&modified_t16(), &truth, &cubic_pair(), &cfg).unwrap();
        let rate = report.rejection_rate();
        assert!(
            (0.03..=0.07).contains(&rate),
            "null rejection rate {rate} outside [0.03, 0.07]"
        );
    }

    #[test]
    fn f_test_power_matches_the_noncentral_oracle() {
        // the statistic is exactly noncentral F here, so the simulated rate
        // must sit within Monte Carlo error of the analytic tail
        let truth = FixedMean::polynomial(vec![1.0, 1.0, 0.0, 1.0]);
        let cfg = SimConfig::new(50, 0.1, 1000, 7_771, 0.05).unwrap();
        let design = d2_design();
        let report = simulate_power(&design, &truth, &cubic_pair(), &cfg).unwrap();
        let rate = report.rejection_rate();
        assert!(rate >= 0.95, "rate = {rate}");

        let rounded = design.round_to(50).unwrap().as_design(&space()).unwrap();
        let delta2 = 50.0 * criteria::schur_noncentrality(&rounded, &cubic_pair()).unwrap() / 0.1;
        let cutoff = f_quantile(2, 46, 0.95).unwrap();
        let oracle = noncentral_f_tail(2, 46, delta2, cutoff);
        let band = (3.0 * (oracle * (1.0 - oracle) / 1000.0).sqrt()).max(1e-3);
        assert!(
            (rate - oracle).abs() <= band,
            "rate {rate} vs oracle {oracle} (band {band})"
        );
    }

    #[test]
    fn simulated_mse_matches_the_covariance_oracle() {
        let truth = FixedMean::polynomial(vec![1.0, 1.0, 0.0, 1.0]);
        let basis = Basis::monomials(4).unwrap();
        let cfg = SimConfig::new(50, 0.1, 600, 99, 0.05).unwrap();
        let design = d2_design();
        let report = simulate_mse(&design, &truth, &Family::linear(basis.clone()), &cfg).unwrap();
        // unbiased linear estimates: MSE equals the covariance diagonal
        let xs = design.round_to(50).unwrap().expand();
        let x = design_matrix(&xs, &basis);
        let cov = (x.transpose() * &x).try_inverse().unwrap() * 0.1;
        for j in 0..4 {
            let oracle = cov[(j, j)];
            let err = (report.estimates[j] - oracle).abs();
            assert!(
                err <= 3.0 * report.std_errors[j],
                "coefficient {j}: {} vs {oracle} (3 SE = {})",
                report.estimates[j],
                3.0 * report.std_errors[j]
            );
        }
    }

    #[test]
    fn three_point_allocation_cannot_estimate_four_coefficients() {
        let t16 = Design::new(
            &[-0.5, 0.5, 1.0],
            &[1.0 / 6.0, 0.5, 1.0 / 3.0],
            &space(),
        )
        .unwrap();
        let truth = FixedMean::polynomial(vec![1.0, 1.0, 0.0, 1.0]);
        let cfg = SimConfig::new(50, 0.1, 1000, 5, 0.05).unwrap();
        assert!(matches!(
            simulate_power(&t16, &truth, &cubic_pair(), &cfg),
            Err(Error::DegenerateDesign { .. })
        ));
        assert!(matches!(
            simulate_mse(
                &t16,
                &truth,
                &Family::linear(Basis::monomials(4).unwrap()),
                &cfg
            ),
            Err(Error::DegenerateDesign { .. })
        ));
    }

    #[test]
    fn no_residual_degrees_of_freedom_is_degenerate() {
        let truth = FixedMean::polynomial(vec![1.0, 1.0]);
        let cfg = SimConfig::new(4, 0.1, 1000, 5, 0.05).unwrap();
        assert!(matches!(
            simulate_power(&t13(), &truth, &cubic_pair(), &cfg),
            Err(Error::DegenerateDesign { .. })
        ));
    }

    #[test]
    fn power_grows_with_the_tested_coefficient() {
        let cfg = SimConfig::new(50, 0.1, 500, 77, 0.05).unwrap();
        let design = modified_t16();
        let mut rates = Vec::new();
        let mut ses = Vec::new();
        for &d0 in &[0.0, 0.35, 0.7, 1.0] {
            let truth = FixedMean::polynomial(vec![1.0, 1.0, 0.0, d0]);
            let report = simulate_power(&design, &truth, &cubic_pair(), &cfg).unwrap();
            rates.push(report.rejection_rate());
            ses.push(report.std_errors[0]);
        }
        let mut soft_inversions = 0;
        for i in 0..rates.len() - 1 {
            if rates[i + 1] < rates[i] {
                soft_inversions += 1;
                let band = 2.0 * (ses[i].powi(2) + ses[i + 1].powi(2)).sqrt();
                assert!(
                    rates[i] - rates[i + 1] <= band,
                    "drop {} -> {} exceeds Monte Carlo error",
                    rates[i],
                    rates[i + 1]
                );
            }
        }
        assert!(soft_inversions <= 1, "rates {rates:?} are not monotone");
    }

    #[test]
    fn reports_are_bitwise_identical_across_thread_counts() {
        let truth = FixedMean::polynomial(vec![1.0, 1.0, 0.05, 0.5]);
        let cfg = SimConfig::new(50, 0.1, 200, 123, 0.05).unwrap();
        let run = || simulate_power(&modified_t16(), &truth, &cubic_pair(), &cfg).unwrap();
        let ambient = run();
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let report = pool.install(run);
            assert_eq!(
                ambient.estimates[0].to_bits(),
                report.estimates[0].to_bits()
            );
            assert_eq!(
                ambient.std_errors[0].to_bits(),
                report.std_errors[0].to_bits()
            );
        }
    }

    #[test]
    fn likelihood_ratio_test_rejects_a_strong_alternative() {
        let family = Family::exp_sum(2).unwrap();
        let theta = DVector::from_vec(vec![1.0, -1.0, 1.0, -2.0]);
        let pair = NestedPair::local(family, theta, vec![2]).unwrap();
        let truth = FixedMean::exp_sum(ExpSumModel::new(vec![(1.0, -1.0), (1.0, -2.0)]).unwrap());
        let design = Design::new(
            &[-1.0, 0.03, 0.697, 1.0],
            &[0.308, 0.253, 0.281, 0.158],
            &space(),
        )
        .unwrap();
        let cfg = SimConfig::new(50, 0.02, 100, 31_337, 0.05).unwrap();
        let report = simulate_power(&design, &truth, &pair, &cfg).unwrap();
        assert!(
            report.rejection_rate() >= 0.9,
            "rate = {}",
            report.rejection_rate()
        );
    }

    #[test]
    fn nested_fit_never_beats_the_full_fit() {
        let family = Family::exp_sum(2).unwrap();
        let truth = ExpSumModel::new(vec![(1.0, -1.0), (0.5, 2.0)]).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| -1.0 + i as f64 / 9.5).collect();
        let bounds = family.bounds().unwrap().clone();
        for seed in 0..5 {
            let mut rng = replicate_rng(seed, 0);
            let means: Vec<f64> = xs.iter().map(|&x| truth.eval(x)).collect();
            let ys = noisy(&means, 0.3, &mut rng);
            let anchor = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0]);
            let (theta_red, rss_r) =
                fit_family(&xs, &ys, &family, &[2], &starts_near(&anchor, &bounds)).unwrap();
            let mut starts = starts_near(&truth.theta(), &bounds);
            starts.push(theta_red);
            let (_, rss_f) = fit_family(&xs, &ys, &family, &[], &starts).unwrap();
            assert!(rss_f <= rss_r * (1.0 + 1e-12), "{rss_f} > {rss_r}");
            assert!(lr_statistic(rss_r, rss_f, xs.len()).unwrap() >= 0.0);
        }
    }

    #[test]
    fn exponential_mse_recovers_the_truth_scale() {
        // opposite-sign rates keep the terms well separated, so the
        // nonlinear estimates concentrate near the truth
        let truth = FixedMean::exp_sum(ExpSumModel::new(vec![(1.0, -1.0), (1.0, 2.0)]).unwrap());
        let design = Design::new(
            &[-1.0, -0.636, 0.394, 1.0],
            &[0.142, 0.444, 0.311, 0.103],
            &space(),
        )
        .unwrap();
        let cfg = SimConfig::new(50, 0.2, 100, 2_024, 0.05).unwrap();
        let report = simulate_mse(&design, &truth, &Family::exp_sum(2).unwrap(), &cfg).unwrap();
        assert_eq!(report.estimates.len(), 4);
        for (j, &mse) in report.estimates.iter().enumerate() {
            assert!(mse.is_finite() && mse >= 0.0);
            assert!(mse < 0.5, "parameter {j} MSE {mse} out of scale");
        }
    }

    #[test]
    fn truth_outside_the_fitted_family_is_rejected() {
        let cfg = SimConfig::new(50, 0.1, 100, 1, 0.05).unwrap();
        let poly = FixedMean::polynomial(vec![1.0, 1.0]);
        assert!(matches!(
            simulate_mse(&d2_design(), &poly, &Family::exp_sum(2).unwrap(), &cfg),
            Err(Error::BadModel { .. })
        ));
        let too_long = FixedMean::polynomial(vec![1.0; 5]);
        assert!(matches!(
            simulate_mse(
                &d2_design(),
                &too_long,
                &Family::linear(Basis::monomials(4).unwrap()),
                &cfg
            ),
            Err(Error::BadModel { .. })
        ));
        let one_term = FixedMean::exp_sum(ExpSumModel::new(vec![(1.0, -1.0)]).unwrap());
        assert!(matches!(
            simulate_mse(&d2_design(), &one_term, &Family::exp_sum(2).unwrap(), &cfg),
            Err(Error::BadModel { .. })
        ));
    }

    #[test]
    fn polynomial_truth_pads_to_the_basis_dimension() {
        let theta = truth_theta(
            &FixedMean::polynomial(vec![1.0, 1.0]),
            &Family::linear(Basis::monomials(4).unwrap()),
        )
        .unwrap();
        assert_eq!(theta.as_slice(), &[1.0, 1.0, 0.0, 0.0]);
    }
}
