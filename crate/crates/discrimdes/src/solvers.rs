//! Design solvers and optimality verification.
//!
//! Three routes to a T-optimal design: [`solve_t_chebyshev`] (closed form
//! from the alternation points of the best approximation, when the rival
//! basis is a Chebyshev system), [`solve_t_exchange`] (first-order exchange,
//! works for nonlinear rivals too), and [`enumerate_t_optimal`] (the full
//! polytope of optimal designs when the optimum is not unique). KL variants
//! replace the squared residual with the precision-weighted one; D_s designs
//! come from [`solve_ds`]. All designs can be re-checked against the
//! directional-derivative condition with [`verify_t_optimal`],
//! [`verify_kl_optimal`] and [`verify_ds_optimal`].

use nalgebra::{DMatrix, DVector};

use crate::approx::{extremal_set, nonlinear_best_approx, remes_exchange, weighted_problem};
use crate::criteria::{self, fit_weighted};
use crate::linalg::{self, golden_max, project_simplex, weighted_gram};
use crate::models::{Basis, Family, FixedMean, GaussianObsModel, NestedPair, Precision};
use crate::{Design, DesignSpace, Error, Result};

/// Hard cap on the extremal-set size accepted for vertex enumeration.
pub const MAX_EXTREMAL_SET: usize = 50;
/// Cap on the number of basic solutions examined during enumeration.
const MAX_BASIC_SOLUTIONS: usize = 2_000_000;
/// Relative singular-value cutoff for the rank of the constraint matrix.
/// Support points are located to roughly 1e-10..1e-8, so directions
/// thinner than this cannot be told apart from exact dependence.
const ENUM_RANK_TOL: f64 = 1e-7;
/// Residual tolerance when a basic solution is tested against the
/// (row-normalized) constraints; must sit above the rank cutoff noise.
const VERTEX_FEAS_TOL: f64 = 1e-6;
/// Weights below this negative slack disqualify a basic solution.
const VERTEX_NEG_TOL: f64 = 1e-10;
/// Two vertices closer than this in L-infinity distance are duplicates.
const VERTEX_DEDUP_TOL: f64 = 1e-6;

/// Polytope of optimal weight vectors over a fixed support set.
///
/// The feasible set is `{w >= 0, Cw = e_1}` where the first row of `C` is
/// all ones (total mass) and the remaining rows are the moment conditions
/// `sum_i w_i lambda(x_i) r(x_i) grad_j(x_i) = 0` at the
/// best-approximation parameter. Vertices are the basic feasible solutions.
#[derive(Clone, Debug)]
pub struct DesignPolytope {
    /// Candidate support points (the extremal set), increasing.
    pub support: Vec<f64>,
    /// Constraint matrix: ones row followed by the moment rows.
    pub constraint_matrix: DMatrix<f64>,
    /// Vertex weight vectors over `support`, sorted lexicographically.
    pub vertices: Vec<Vec<f64>>,
    /// Dimension of the optimal face: |support| - rank(constraints).
    pub free_dimension: usize,
}

impl DesignPolytope {
    /// Design at a convex combination of the vertices.
    pub fn mixture(&self, coeffs: &[f64], space: &DesignSpace) -> Result<Design> {
        if coeffs.len() != self.vertices.len() {
            return Err(Error::BadWeights {
                reason: format!(
                    "{} mixture coefficients for {} vertices",
                    coeffs.len(),
                    self.vertices.len()
                ),
            });
        }
        let total: f64 = coeffs.iter().sum();
        if coeffs.iter().any(|&c| !(c >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::BadWeights {
                reason: "mixture coefficients must be a probability vector".into(),
            });
        }
        let mut w = vec![0.0; self.support.len()];
        for (v, &c) in self.vertices.iter().zip(coeffs) {
            for (wi, &vi) in w.iter_mut().zip(v) {
                *wi += c * vi;
            }
        }
        Design::new(&self.support, &w, space)
    }

    /// Design sitting at one vertex.
    pub fn vertex_design(&self, index: usize, space: &DesignSpace) -> Result<Design> {
        let v = self.vertices.get(index).ok_or_else(|| Error::BadWeights {
            reason: format!("vertex {index} of {}", self.vertices.len()),
        })?;
        Design::new(&self.support, v, space)
    }

    /// Whether a design lies in the polytope: every support point matches a
    /// polytope point within `point_tol` and the constraint rows hold within
    /// `moment_tol` after re-expressing the design over `support`.
    pub fn contains(&self, design: &Design, point_tol: f64, moment_tol: f64) -> bool {
        let mut w = vec![0.0; self.support.len()];
        for (&x, &wx) in design.points().iter().zip(design.weights()) {
            let mut best: Option<(usize, f64)> = None;
            for (j, &sx) in self.support.iter().enumerate() {
                let d = (x - sx).abs();
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            match best {
                Some((j, d)) if d <= point_tol => w[j] += wx,
                _ => return false,
            }
        }
        let wv = DVector::from_vec(w);
        let mut rhs = DVector::zeros(self.constraint_matrix.nrows());
        rhs[0] = 1.0;
        let resid = &self.constraint_matrix * wv - rhs;
        resid.amax() <= moment_tol
    }
}

/// Outcome of an equivalence-theorem check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Optimal,
    Suboptimal,
    /// The check could not decide: degenerate value or unreliable inner fit.
    Inconclusive,
}

/// Result of verifying a design against the directional-derivative
/// condition of its criterion.
#[derive(Clone, Debug)]
pub struct OptimalityReport {
    /// Criterion value of the design.
    pub value: f64,
    /// Largest directional violation found on the refined grid
    /// (T/KL: max_x lambda r^2 - value; D_s: max_x d(x) - s).
    pub max_violation: f64,
    /// Residual level at each support point (T/KL: sqrt(lambda)|r|;
    /// D_s: the directional derivative d(x_i)).
    pub support_residuals: Vec<f64>,
    pub verdict: Verdict,
    /// Relative tolerance the verdict was formed with.
    pub tol: f64,
}

impl OptimalityReport {
    pub fn is_optimal(&self) -> bool {
        self.verdict == Verdict::Optimal
    }
}

/// Knobs of the exchange solvers.
#[derive(Clone, Debug)]
pub struct ExchangeOpts {
    /// Scan-grid resolution (at least the space's own grid is used).
    pub grid_n: usize,
    pub max_iter: usize,
    /// Relative convergence tolerance on the directional gap.
    pub tol: f64,
    /// Final support weights below this are dropped.
    pub drop_tol: f64,
    /// Period of the weight re-optimization / support polish passes.
    pub reopt_every: usize,
}

impl Default for ExchangeOpts {
    fn default() -> Self {
        Self {
            grid_n: 1001,
            max_iter: 600,
            tol: 1e-6,
            drop_tol: 5e-3,
            reopt_every: 25,
        }
    }
}

impl ExchangeOpts {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.reopt_every == 0 {
            return Err(Error::BadSpec {
                reason: "max_iter and reopt_every must be positive".into(),
            });
        }
        if !(self.tol > 0.0) || !(self.drop_tol >= 0.0) {
            return Err(Error::BadSpec {
                reason: format!(
                    "tolerances must be positive, got tol {} drop_tol {}",
                    self.tol, self.drop_tol
                ),
            });
        }
        Ok(())
    }
}

/// Full record of an exchange run, including non-converged ones.
#[derive(Clone, Debug)]
pub struct ExchangeRun {
    /// Last (cleaned-up) iterate.
    pub design: Design,
    pub report: OptimalityReport,
    pub iterations: usize,
    pub converged: bool,
}

// ---------------------------------------------------------------------------
// closed-form Chebyshev-point designs

/// T-optimal design from the alternation points of the best approximation.
///
/// Requires the rival basis to be a Chebyshev system and the best
/// approximation of `eta` to have exactly `basis.len() + 1` extremal
/// points x_1 < ... < x_{m+1}; the weights are |u_i| / sum |u_j| with u
/// solving X u = e_{m+1} over the rows (f_1, ..., f_m, eta) evaluated at
/// the extremal points. The construction is certified by an internal
/// optimality check before the design is returned.
pub fn solve_t_chebyshev(eta: &FixedMean, basis: &Basis, space: &DesignSpace) -> Result<Design> {
    let ba = remes_exchange(eta, basis, space, 1e-11, 100)?;
    let m = basis.len();
    if ba.extremal_points.len() != m + 1 {
        return Err(Error::WrongAlternationCount {
            expected: m + 1,
            found: ba.extremal_points.len(),
        });
    }
    let pts = &ba.extremal_points;
    let mut x = DMatrix::zeros(m + 1, m + 1);
    for (j, &p) in pts.iter().enumerate() {
        let f = basis.eval(p);
        for i in 0..m {
            x[(i, j)] = f[i];
        }
        x[(m, j)] = eta.eval(p);
    }
    let mut e = DVector::zeros(m + 1);
    e[m] = 1.0;
    let u = linalg::solve(&x, &e).ok_or_else(|| Error::Degenerate {
        reason: "singular alternation-point system".into(),
    })?;
    let total: f64 = u.iter().map(|v| v.abs()).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate {
            reason: "alternation weights vanish".into(),
        });
    }
    let w: Vec<f64> = u.iter().map(|v| v.abs() / total).collect();
    let design = Design::new(pts, &w, space)?;
    let report = verify_t_optimal(&design, eta, &Family::linear(basis.clone()), space, 1e-7)?;
    if !report.is_optimal() {
        return Err(Error::Degenerate {
            reason: format!(
                "alternation-point design failed verification (violation {:.3e})",
                report.max_violation
            ),
        });
    }
    Ok(design)
}

// ---------------------------------------------------------------------------
// polytope enumeration

/// All T-optimal designs, as a polytope of weight vectors over the
/// extremal set of the best approximation.
pub fn enumerate_t_optimal(
    eta: &FixedMean,
    rival: &Family,
    space: &DesignSpace,
) -> Result<DesignPolytope> {
    enumerate_core(eta, rival, &Precision::Constant(1.0), space)
}

/// KL variant of [`enumerate_t_optimal`]: the moment conditions carry the
/// precision weight. Non-constant precision needs a linear rival family.
pub fn enumerate_kl_optimal(
    obs_true: &GaussianObsModel,
    rival: &Family,
    space: &DesignSpace,
) -> Result<DesignPolytope> {
    enumerate_core(obs_true.mean(), rival, obs_true.precision(), space)
}

fn enumerate_core(
    eta: &FixedMean,
    rival: &Family,
    precision: &Precision,
    space: &DesignSpace,
) -> Result<DesignPolytope> {
    let (theta_bar, support) = match (rival, precision) {
        (_, Precision::Constant(_)) => {
            let ba = nonlinear_best_approx(eta, rival, space, 8)?;
            let ext = extremal_set(eta, rival, &ba.theta_bar, space, 1e-6)?;
            (ba.theta_bar, ext)
        }
        (Family::Linear(basis), _) => {
            let (target, scaled) = weighted_problem(eta, basis, precision);
            let ba = remes_exchange(&target, &scaled, space, 1e-11, 100)?;
            let fam = Family::linear(scaled);
            let ext = extremal_set(&target, &fam, &ba.theta_bar, space, 1e-6)?;
            (ba.theta_bar, ext)
        }
        _ => {
            return Err(Error::BadModel {
                reason: "enumeration with non-constant precision needs a linear rival".into(),
            })
        }
    };
    if support.degenerate {
        return Err(Error::Degenerate {
            reason: "the rival family contains the true mean; every design is optimal".into(),
        });
    }
    let pts = support.points;
    if pts.len() > MAX_EXTREMAL_SET {
        return Err(Error::CombinatorialBlowup {
            size: pts.len(),
            cap: MAX_EXTREMAL_SET,
        });
    }
    let dim = rival.dim();
    let n = pts.len();
    let mut c = DMatrix::zeros(dim + 1, n);
    for (i, &x) in pts.iter().enumerate() {
        let r = eta.eval(x) - rival.eval(&theta_bar, x)?;
        let g = rival.gradient(&theta_bar, x)?;
        c[(0, i)] = 1.0;
        for j in 0..dim {
            c[(j + 1, i)] = precision.at(x).max(0.0) * r * g[j];
        }
    }
    // Row-normalized copy for the numerical work.
    let mut cn = c.clone();
    for j in 1..cn.nrows() {
        let scale = cn.row(j).amax();
        if scale > 0.0 {
            for i in 0..n {
                cn[(j, i)] /= scale;
            }
        }
    }
    let svd = cn.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > ENUM_RANK_TOL * smax.max(f64::MIN_POSITIVE))
        .count();
    let free_dimension = n - rank;
    let mut b = DVector::zeros(dim + 1);
    b[0] = 1.0;

    if binomial(n, rank) > MAX_BASIC_SOLUTIONS {
        return Err(Error::CombinatorialBlowup {
            size: n,
            cap: MAX_EXTREMAL_SET,
        });
    }
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for_each_combination(n, rank, &mut |cols| {
        let mut sub = DMatrix::zeros(dim + 1, rank);
        for (jj, &col) in cols.iter().enumerate() {
            sub.set_column(jj, &cn.column(col));
        }
        let (wb, deficient) = linalg::solve_min_norm(&sub, &b);
        if deficient {
            return; // the columns do not form a basis
        }
        let resid = &sub * &wb - &b;
        if resid.amax() > VERTEX_FEAS_TOL || wb.iter().any(|&w| w < -VERTEX_NEG_TOL) {
            return;
        }
        let mut full = vec![0.0; n];
        for (jj, &col) in cols.iter().enumerate() {
            full[col] = wb[jj].max(0.0);
        }
        let total: f64 = full.iter().sum();
        if !(total > 0.0) {
            return;
        }
        full.iter_mut().for_each(|w| *w /= total);
        let dup = vertices.iter().any(|v| {
            v.iter()
                .zip(&full)
                .all(|(a, b)| (a - b).abs() <= VERTEX_DEDUP_TOL)
        });
        if !dup {
            vertices.push(full);
        }
    });
    if vertices.is_empty() {
        return Err(Error::EmptyPolytope);
    }
    vertices.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(DesignPolytope {
        support: pts,
        constraint_matrix: c,
        vertices,
        free_dimension,
    })
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc > MAX_BASIC_SOLUTIONS {
            return acc;
        }
    }
    acc
}

/// Visit every k-subset of {0, ..., n-1} in lexicographic order.
fn for_each_combination(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k > n {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance the rightmost index that still has room
        let mut i = k - 1;
        while idx[i] == i + n - k {
            if i == 0 {
                return;
            }
            i -= 1;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

// ---------------------------------------------------------------------------
// first-order exchange (T and KL)

/// T-optimal design by first-order exchange; errors with `NoConvergence`
/// when the directional gap has not closed within `opts.max_iter`.
pub fn solve_t_exchange(
    eta: &FixedMean,
    rival: &Family,
    space: &DesignSpace,
    opts: &ExchangeOpts,
) -> Result<Design> {
    let run = run_t_exchange(eta, rival, space, opts)?;
    if !run.converged {
        return Err(Error::NoConvergence {
            iterations: run.iterations,
            gap: run.report.max_violation,
        });
    }
    Ok(run.design)
}

/// Exchange run for the T-criterion that always returns its last iterate.
pub fn run_t_exchange(
    eta: &FixedMean,
    rival: &Family,
    space: &DesignSpace,
    opts: &ExchangeOpts,
) -> Result<ExchangeRun> {
    let eta = eta.clone();
    exchange_core(&|x| eta.eval(x), &|_| 1.0, rival, space, opts)
}

/// KL-optimal design by first-order exchange under a heteroscedastic
/// Gaussian truth; reduces to [`solve_t_exchange`] at constant precision.
pub fn solve_kl_exchange(
    obs_true: &GaussianObsModel,
    rival: &Family,
    space: &DesignSpace,
    opts: &ExchangeOpts,
) -> Result<Design> {
    let run = run_kl_exchange(obs_true, rival, space, opts)?;
    if !run.converged {
        return Err(Error::NoConvergence {
            iterations: run.iterations,
            gap: run.report.max_violation,
        });
    }
    Ok(run.design)
}

/// Exchange run for the KL-criterion that always returns its last iterate.
pub fn run_kl_exchange(
    obs_true: &GaussianObsModel,
    rival: &Family,
    space: &DesignSpace,
    opts: &ExchangeOpts,
) -> Result<ExchangeRun> {
    let mean = obs_true.mean().clone();
    let prec = obs_true.precision().clone();
    exchange_core(
        &|x| mean.eval(x),
        &|x| prec.at(x).max(0.0),
        rival,
        space,
        opts,
    )
}

/// Shared exchange loop: step toward the maximizer of the directional
/// function lambda(x) r(x)^2, with periodic weight re-optimization and
/// support polish.
fn exchange_core(
    eta_f: &dyn Fn(f64) -> f64,
    lam_f: &dyn Fn(f64) -> f64,
    rival: &Family,
    space: &DesignSpace,
    opts: &ExchangeOpts,
) -> Result<ExchangeRun> {
    opts.validate()?;
    let xs = space.grid_n(opts.grid_n.max(space.grid_points()).max(101));
    let h = xs[1] - xs[0];
    let merge_eps = 1e-9 * space.span();
    let etas_grid: Vec<f64> = xs.iter().map(|&x| eta_f(x)).collect();
    let lam_grid: Vec<f64> = xs.iter().map(|&x| lam_f(x)).collect();
    let scale0 = etas_grid
        .iter()
        .zip(&lam_grid)
        .map(|(e, l)| l * e * e)
        .fold(1.0_f64, f64::max);

    // start from a uniform design on an equally spaced support
    let n0 = (rival.dim() + 2).max(5);
    let mut supp: Vec<(f64, f64)> = (0..n0)
        .map(|i| {
            let t = i as f64 / (n0 - 1) as f64;
            (
                space.lower() + t * space.span(),
                1.0 / n0 as f64,
            )
        })
        .collect();
    let mut theta = rival.zero_theta();
    let mut have_theta = false;
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=opts.max_iter {
        iterations = k;
        let thorough = !have_theta || k % opts.reopt_every == 1;
        let value = refit(&mut theta, have_theta, thorough, &supp, eta_f, lam_f, rival);
        have_theta = true;
        let (mut xstar, phimax) = {
            let phi = |x: f64| {
                let r = eta_f(x) - rival.eval(&theta, x).expect("theta has the family dimension");
                lam_f(x).max(0.0) * r * r
            };
            grid_argmax(&xs, &etas_grid, &lam_grid, rival, &theta, &phi)
        };
        if k == 1 && phimax <= 1e-13 * scale0 {
            return Err(Error::Degenerate {
                reason: "the rival family reproduces the true mean; the criterion is flat zero"
                    .into(),
            });
        }
        if phimax - value <= opts.tol * value.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        // plain mass-mixing closes the gap like 1/k; the periodic polish and
        // weight re-optimization do the real converging, so re-test after them
        if k % opts.reopt_every == 0 {
            {
                let phi = |x: f64| {
                    let r =
                        eta_f(x) - rival.eval(&theta, x).expect("theta has the family dimension");
                    lam_f(x).max(0.0) * r * r
                };
                polish_support(&mut supp, h, space, merge_eps, &phi);
            }
            reopt_weights(&mut supp, &mut theta, eta_f, lam_f, rival, 40);
            prune(&mut supp, 1e-5);
            let value = refit(&mut theta, true, true, &supp, eta_f, lam_f, rival);
            let (xstar2, phimax2) = {
                let phi = |x: f64| {
                    let r =
                        eta_f(x) - rival.eval(&theta, x).expect("theta has the family dimension");
                    lam_f(x).max(0.0) * r * r
                };
                grid_argmax(&xs, &etas_grid, &lam_grid, rival, &theta, &phi)
            };
            if phimax2 - value <= opts.tol * value.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
            xstar = xstar2;
        }
        let alpha = 1.0 / (k + 1) as f64;
        add_mass(&mut supp, xstar, alpha, merge_eps);
    }

    // terminal cleanup: merge to grid resolution, drop stragglers, then
    // alternate support polish with weight re-optimization until stable
    let design = Design::new(
        &supp.iter().map(|p| p.0).collect::<Vec<_>>(),
        &supp.iter().map(|p| p.1).collect::<Vec<_>>(),
        space,
    )?;
    let design = design.merge_support(h).drop_small(opts.drop_tol);
    let mut supp: Vec<(f64, f64)> = design.iter().collect();
    for _ in 0..4 {
        let _ = refit(&mut theta, true, true, &supp, eta_f, lam_f, rival);
        {
            let phi = |x: f64| {
                let r = eta_f(x) - rival.eval(&theta, x).expect("theta has the family dimension");
                lam_f(x).max(0.0) * r * r
            };
            polish_support(&mut supp, h, space, merge_eps, &phi);
        }
        reopt_weights(&mut supp, &mut theta, eta_f, lam_f, rival, 200);
    }
    let design = Design::new(
        &supp.iter().map(|p| p.0).collect::<Vec<_>>(),
        &supp.iter().map(|p| p.1).collect::<Vec<_>>(),
        space,
    )?;

    let report = verify_weighted(&design, eta_f, lam_f, rival, space, opts.tol.max(1e-9))?;
    // the cleaned-up design may satisfy the stopping rule even when the raw
    // iterate never did; convergence is about the design we hand back
    converged = converged
        || report.max_violation <= opts.tol * report.value.max(f64::MIN_POSITIVE);
    Ok(ExchangeRun {
        design,
        report,
        iterations,
        converged,
    })
}

/// Inner fit on the current support; returns the criterion value.
fn refit(
    theta: &mut DVector<f64>,
    warm: bool,
    thorough: bool,
    supp: &[(f64, f64)],
    eta_f: &dyn Fn(f64) -> f64,
    lam_f: &dyn Fn(f64) -> f64,
    rival: &Family,
) -> f64 {
    let pts: Vec<f64> = supp.iter().map(|p| p.0).collect();
    let etas: Vec<f64> = pts.iter().map(|&x| eta_f(x)).collect();
    let lams: Vec<f64> = pts.iter().map(|&x| lam_f(x).max(0.0)).collect();
    let wl: Vec<f64> = supp
        .iter()
        .zip(&lams)
        .map(|(p, &l)| p.1 * l)
        .collect();
    let warm_start = if warm {
        std::slice::from_ref(&*theta)
    } else {
        &[]
    };
    let (th, _) = fit_weighted(&pts, &etas, &wl, rival, warm_start, thorough);
    *theta = th;
    supp.iter()
        .zip(etas.iter().zip(&lams))
        .map(|(p, (&e, &l))| {
            let r = e - rival.eval(theta, p.0).expect("dims fixed");
            p.1 * l * r * r
        })
        .sum()
}

/// Rightmost grid argmax of the directional function, golden-polished.
fn grid_argmax(
    xs: &[f64],
    etas_grid: &[f64],
    lam_grid: &[f64],
    rival: &Family,
    theta: &DVector<f64>,
    phi: &dyn Fn(f64) -> f64,
) -> (f64, f64) {
    let mut bi = 0;
    let mut bv = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let r = etas_grid[i] - rival.eval(theta, x).expect("dims fixed");
        let v = lam_grid[i].max(0.0) * r * r;
        if v >= bv {
            bv = v;
            bi = i;
        }
    }
    let lo = xs[bi.saturating_sub(1)];
    let hi = xs[(bi + 1).min(xs.len() - 1)];
    let (px, pv) = golden_max(lo, hi, 1e-11 * (xs[xs.len() - 1] - xs[0]).max(1.0), phi);
    if pv > bv {
        (px, pv)
    } else {
        (xs[bi], bv)
    }
}

/// Mix an atom at `x` with mass `alpha` into the design, merging onto an
/// existing point when closer than `eps`.
fn add_mass(supp: &mut Vec<(f64, f64)>, x: f64, alpha: f64, eps: f64) {
    for p in supp.iter_mut() {
        p.1 *= 1.0 - alpha;
    }
    if let Some(p) = supp.iter_mut().find(|p| (p.0 - x).abs() <= eps) {
        p.1 += alpha;
    } else {
        supp.push((x, alpha));
        supp.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
}

/// Move each support point to the local maximum of the directional
/// function within 1.5 grid steps, then re-merge.
fn polish_support(
    supp: &mut Vec<(f64, f64)>,
    h: f64,
    space: &DesignSpace,
    merge_eps: f64,
    phi: &dyn Fn(f64) -> f64,
) {
    for p in supp.iter_mut() {
        let lo = (p.0 - 1.5 * h).max(space.lower());
        let hi = (p.0 + 1.5 * h).min(space.upper());
        let (px, pv) = golden_max(lo, hi, 1e-11 * space.span(), phi);
        if pv > phi(p.0) {
            p.0 = px;
        }
    }
    supp.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(supp.len());
    for &(x, w) in supp.iter() {
        match merged.last_mut() {
            Some(last) if (x - last.0).abs() <= merge_eps => {
                let tw = last.1 + w;
                last.0 = (last.0 * last.1 + x * w) / tw;
                last.1 = tw;
            }
            _ => merged.push((x, w)),
        }
    }
    *supp = merged;
}

fn prune(supp: &mut Vec<(f64, f64)>, eps: f64) {
    supp.retain(|p| p.1 > eps);
    let total: f64 = supp.iter().map(|p| p.1).sum();
    if total > 0.0 {
        for p in supp.iter_mut() {
            p.1 /= total;
        }
    }
}

/// Re-optimize weights on the fixed support: projected supergradient
/// ascent on the concave map w -> min_theta sum_i w_i lambda_i r_i^2,
/// finished by a minimal-change projection onto the stationarity
/// conditions at the fitted parameter.
fn reopt_weights(
    supp: &mut [(f64, f64)],
    theta: &mut DVector<f64>,
    eta_f: &dyn Fn(f64) -> f64,
    lam_f: &dyn Fn(f64) -> f64,
    rival: &Family,
    rounds: usize,
) {
    let pts: Vec<f64> = supp.iter().map(|p| p.0).collect();
    let etas: Vec<f64> = pts.iter().map(|&x| eta_f(x)).collect();
    let lams: Vec<f64> = pts.iter().map(|&x| lam_f(x).max(0.0)).collect();
    let n = pts.len();
    let mut w: Vec<f64> = supp.iter().map(|p| p.1).collect();

    let value_of = |w: &[f64], theta: &mut DVector<f64>| -> f64 {
        let wl: Vec<f64> = w.iter().zip(&lams).map(|(w, l)| w * l).collect();
        let (th, _) = fit_weighted(&pts, &etas, &wl, rival, std::slice::from_ref(&*theta), false);
        *theta = th;
        pts.iter()
            .enumerate()
            .map(|(i, &x)| {
                let r = etas[i] - rival.eval(theta, x).expect("dims fixed");
                w[i] * lams[i] * r * r
            })
            .sum()
    };

    let mut value = value_of(&w, theta);
    for t in 1..=rounds {
        let g: Vec<f64> = pts
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let r = etas[i] - rival.eval(theta, x).expect("dims fixed");
                lams[i] * r * r
            })
            .collect();
        let gmax = g.iter().fold(0.0_f64, |a, &b| a.max(b));
        if !(gmax > 0.0) {
            break;
        }
        let step = 0.5 / (gmax * (t as f64).sqrt());
        let cand: Vec<f64> = w.iter().zip(&g).map(|(w, g)| w + step * g).collect();
        let cand = project_simplex(&cand);
        let cand_value = value_of(&cand, theta);
        if cand_value >= value {
            w = cand;
            value = cand_value;
        }
    }

    // minimal-change projection onto { sum w = 1, sum w lambda r grad_j = 0 }
    let dim = rival.dim();
    let mut a = DMatrix::zeros(dim + 1, n);
    for (i, &x) in pts.iter().enumerate() {
        let r = etas[i] - rival.eval(theta, x).expect("dims fixed");
        let g = rival.gradient(theta, x).expect("dims fixed");
        a[(0, i)] = 1.0;
        for j in 0..dim {
            a[(j + 1, i)] = lams[i] * r * g[j];
        }
    }
    let mut b = DVector::zeros(dim + 1);
    b[0] = 1.0;
    let wv = DVector::from_vec(w.clone());
    let slack = &a * &wv - &b;
    let aat = &a * a.transpose();
    let (y, _) = linalg::solve_min_norm(&aat, &slack);
    let proj = &wv - a.transpose() * y;
    if proj.iter().all(|&w| w >= -VERTEX_NEG_TOL) {
        let mut cand: Vec<f64> = proj.iter().map(|&w| w.max(0.0)).collect();
        let total: f64 = cand.iter().sum();
        if total > 0.0 {
            cand.iter_mut().for_each(|w| *w /= total);
            let mut th = theta.clone();
            let cand_value = value_of(&cand, &mut th);
            if cand_value >= value - 1e-9 * value.abs().max(1e-12) {
                w = cand;
                *theta = th;
            }
        }
    }
    for (p, &wi) in supp.iter_mut().zip(&w) {
        p.1 = wi;
    }
}

// ---------------------------------------------------------------------------
// D_s designs

/// Locally D_s-optimal design for the tested coordinates of a nested pair:
/// first-order exchange on the determinant ratio with directional
/// derivative d(x) = g_full' M_full^-1 g_full - g_red' M_red^-1 g_red and
/// equivalence threshold `s`. `s` must equal the pair's tested-coordinate
/// count and is taken explicitly to make the intent visible at call sites.
pub fn solve_ds(
    pair: &NestedPair,
    space: &DesignSpace,
    s: usize,
    opts: &ExchangeOpts,
) -> Result<Design> {
    let run = run_ds(pair, space, s, opts)?;
    if !run.converged {
        return Err(Error::NoConvergence {
            iterations: run.iterations,
            gap: run.report.max_violation,
        });
    }
    Ok(run.design)
}

/// D_s exchange run that always returns its last iterate.
pub fn run_ds(
    pair: &NestedPair,
    space: &DesignSpace,
    s: usize,
    opts: &ExchangeOpts,
) -> Result<ExchangeRun> {
    opts.validate()?;
    if s != pair.s() {
        return Err(Error::BadModel {
            reason: format!("s = {s} but the pair tests {} coordinates", pair.s()),
        });
    }
    let xs = space.grid_n(opts.grid_n.max(space.grid_points()).max(101));
    let h = xs[1] - xs[0];
    let merge_eps = 1e-9 * space.span();
    let m1 = pair.m1();

    let n0 = (m1 + 2).max(6);
    let mut supp: Vec<(f64, f64)> = (0..n0)
        .map(|i| {
            let t = i as f64 / (n0 - 1) as f64;
            (space.lower() + t * space.span(), 1.0 / n0 as f64)
        })
        .collect();
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=opts.max_iter {
        iterations = k;
        let dir = match ds_direction(&supp, pair) {
            Some(d) => d,
            None => {
                return Err(Error::Degenerate {
                    reason: "information matrix became singular during the exchange".into(),
                })
            }
        };
        let (mut xstar, dmax) = scan_direction(&xs, space, &dir);
        if dmax - s as f64 <= opts.tol * s as f64 {
            converged = true;
            break;
        }
        // as in the squared-residual exchange, the periodic clean-up passes
        // do the real converging, so re-test right after them
        if k % opts.reopt_every == 0 {
            polish_support(&mut supp, h, space, merge_eps, &|x| dir(x));
            reopt_ds_weights(&mut supp, pair, 40);
            prune(&mut supp, 1e-5);
            if let Some(dir) = ds_direction(&supp, pair) {
                let (xstar2, dmax2) = scan_direction(&xs, space, &dir);
                if dmax2 - s as f64 <= opts.tol * s as f64 {
                    converged = true;
                    break;
                }
                xstar = xstar2;
            }
        }
        let alpha = 1.0 / (k + 1) as f64;
        add_mass(&mut supp, xstar, alpha, merge_eps);
    }

    let design = Design::new(
        &supp.iter().map(|p| p.0).collect::<Vec<_>>(),
        &supp.iter().map(|p| p.1).collect::<Vec<_>>(),
        space,
    )?;
    let design = design.merge_support(h).drop_small(opts.drop_tol);
    let mut supp: Vec<(f64, f64)> = design.iter().collect();
    for _ in 0..6 {
        if let Some(dir) = ds_direction(&supp, pair) {
            polish_support(&mut supp, h, space, merge_eps, &|x| dir(x));
        }
        reopt_ds_weights(&mut supp, pair, 1000);
    }
    let design = Design::new(
        &supp.iter().map(|p| p.0).collect::<Vec<_>>(),
        &supp.iter().map(|p| p.1).collect::<Vec<_>>(),
        space,
    )?;
    let report = verify_ds_optimal(&design, pair, space, opts.tol.max(1e-9))?;
    let converged = converged || report.max_violation <= opts.tol * s as f64;
    Ok(ExchangeRun {
        design,
        report,
        iterations,
        converged,
    })
}

/// Directional derivative of the log determinant ratio as a closure;
/// `None` when either information matrix is singular.
fn ds_direction(
    supp: &[(f64, f64)],
    pair: &NestedPair,
) -> Option<impl Fn(f64) -> f64> {
    let m2 = pair.m2();
    let grads: Vec<DVector<f64>> = supp.iter().map(|p| pair.full_gradient(p.0)).collect();
    let ws: Vec<f64> = supp.iter().map(|p| p.1).collect();
    let m_full = weighted_gram(&grads, &ws);
    let m_red = m_full.view((0, 0), (m2, m2)).into_owned();
    if linalg::det(&m_full).abs() < criteria::SINGULAR_DET_TOL
        || linalg::det(&m_red).abs() < criteria::SINGULAR_DET_TOL
    {
        return None;
    }
    let inv_full = linalg::inverse(&m_full)?;
    let inv_red = linalg::inverse(&m_red)?;
    let pair = pair.clone();
    Some(move |x: f64| {
        let g = pair.full_gradient(x);
        let gr = g.rows(0, m2).into_owned();
        (g.transpose() * &inv_full * &g)[(0, 0)] - (gr.transpose() * &inv_red * &gr)[(0, 0)]
    })
}

/// Rightmost grid argmax of a direction function, golden-polished.
fn scan_direction(xs: &[f64], space: &DesignSpace, dir: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let mut bi = 0;
    let mut bv = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let v = dir(x);
        if v >= bv {
            bv = v;
            bi = i;
        }
    }
    let lo = xs[bi.saturating_sub(1)];
    let hi = xs[(bi + 1).min(xs.len() - 1)];
    let (px, pv) = golden_max(lo, hi, 1e-11 * space.span(), dir);
    if pv > bv {
        (px, pv)
    } else {
        (xs[bi], bv)
    }
}

/// Projected supergradient ascent on log |M_full| - log |M_red|; the
/// gradient in the weights is exactly the directional derivative at the
/// support points. Since sum_i w_i d(x_i) = s for every nonsingular design,
/// the multiplicative update w_i <- w_i (d(x_i)/s)^(1/2) preserves total
/// mass to first order and fixes exactly the weight vectors where every
/// supported point attains the equivalence level; the square root damps the
/// limit cycling the undamped update exhibits on determinant ratios.
fn reopt_ds_weights(supp: &mut [(f64, f64)], pair: &NestedPair, rounds: usize) {
    let s = pair.s() as f64;
    for _ in 0..rounds {
        let dir = match ds_direction(supp, pair) {
            Some(d) => d,
            None => return,
        };
        let next: Vec<f64> = supp
            .iter()
            .map(|p| p.1 * (dir(p.0) / s).max(0.0).sqrt())
            .collect();
        let total: f64 = next.iter().sum();
        if !(total > 0.0) {
            return;
        }
        let mut changed = 0.0_f64;
        for (p, &w) in supp.iter_mut().zip(&next) {
            let w = w / total;
            changed = changed.max((p.1 - w).abs());
            p.1 = w;
        }
        if changed < 1e-14 {
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// verification

/// Equivalence-theorem check for T-optimality: the design is optimal iff
/// the squared residual of the inner minimizer nowhere exceeds the
/// criterion value (relative `tol`), and every support point sits at the
/// residual's sup level.
pub fn verify_t_optimal(
    design: &Design,
    eta: &FixedMean,
    rival: &Family,
    space: &DesignSpace,
    tol: f64,
) -> Result<OptimalityReport> {
    let eta = eta.clone();
    verify_weighted(design, &|x| eta.eval(x), &|_| 1.0, rival, space, tol)
}

/// Equivalence-theorem check for KL-optimality under heteroscedastic
/// Gaussian observations.
pub fn verify_kl_optimal(
    design: &Design,
    obs_true: &GaussianObsModel,
    rival: &Family,
    space: &DesignSpace,
    tol: f64,
) -> Result<OptimalityReport> {
    let mean = obs_true.mean().clone();
    let prec = obs_true.precision().clone();
    verify_weighted(
        design,
        &|x| mean.eval(x),
        &|x| prec.at(x).max(0.0),
        rival,
        space,
        tol,
    )
}

fn verify_weighted(
    design: &Design,
    eta_f: &dyn Fn(f64) -> f64,
    lam_f: &dyn Fn(f64) -> f64,
    rival: &Family,
    space: &DesignSpace,
    tol: f64,
) -> Result<OptimalityReport> {
    if !(tol > 0.0) {
        return Err(Error::BadSpec {
            reason: format!("verification tolerance must be positive, got {tol}"),
        });
    }
    // inner minimum on the design itself
    let pts = design.points();
    let ws = design.weights();
    let etas: Vec<f64> = pts.iter().map(|&x| eta_f(x)).collect();
    let lams: Vec<f64> = pts.iter().map(|&x| lam_f(x).max(0.0)).collect();
    let wl: Vec<f64> = ws.iter().zip(&lams).map(|(w, l)| w * l).collect();
    let (theta, singular) = fit_weighted(pts, &etas, &wl, rival, &[], true);
    let support_residuals: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(i, &x)| lams[i].sqrt() * (etas[i] - rival.eval(&theta, x).expect("dims fixed")).abs())
        .collect();
    let value: f64 = support_residuals
        .iter()
        .zip(ws)
        .map(|(r, &w)| w * r * r)
        .sum();

    // refined scan for the directional maximum
    let xs = space.grid_n((10 * space.grid_points()).max(2001));
    let phi = |x: f64| {
        let r = eta_f(x) - rival.eval(&theta, x).expect("dims fixed");
        lam_f(x).max(0.0) * r * r
    };
    let mut bi = 0;
    let mut bv = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let v = phi(x);
        if v >= bv {
            bv = v;
            bi = i;
        }
    }
    let (_, pv) = golden_max(
        xs[bi.saturating_sub(1)],
        xs[(bi + 1).min(xs.len() - 1)],
        1e-12 * space.span(),
        &phi,
    );
    let sup_phi = pv.max(bv);
    let max_violation = sup_phi - value;

    let sup_level = sup_phi.sqrt();
    let verdict = if singular || sup_phi <= 1e-14 * (1.0 + value) {
        Verdict::Inconclusive
    } else if max_violation <= tol * value
        && support_residuals
            .iter()
            .all(|&r| r >= sup_level * (1.0 - tol))
    {
        Verdict::Optimal
    } else {
        Verdict::Suboptimal
    };
    Ok(OptimalityReport {
        value,
        max_violation,
        support_residuals,
        verdict,
        tol,
    })
}

/// Equivalence-theorem check for D_s-optimality: optimal iff the
/// directional derivative d(x) nowhere exceeds s (relative `tol`) and
/// every support point attains it.
pub fn verify_ds_optimal(
    design: &Design,
    pair: &NestedPair,
    space: &DesignSpace,
    tol: f64,
) -> Result<OptimalityReport> {
    if !(tol > 0.0) {
        return Err(Error::BadSpec {
            reason: format!("verification tolerance must be positive, got {tol}"),
        });
    }
    let s = pair.s() as f64;
    let supp: Vec<(f64, f64)> = design.iter().collect();
    let value = criteria::ds_value(design, pair)?;
    let dir = ds_direction(&supp, pair).ok_or(Error::SingularReduced { det: 0.0 })?;
    let xs = space.grid_n((10 * space.grid_points()).max(2001));
    let mut bi = 0;
    let mut bv = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let v = dir(x);
        if v >= bv {
            bv = v;
            bi = i;
        }
    }
    let (_, pv) = golden_max(
        xs[bi.saturating_sub(1)],
        xs[(bi + 1).min(xs.len() - 1)],
        1e-12 * space.span(),
        &dir,
    );
    let dmax = pv.max(bv);
    let support_residuals: Vec<f64> = supp.iter().map(|p| dir(p.0)).collect();
    let max_violation = dmax - s;
    let verdict = if max_violation <= tol * s
        && support_residuals.iter().all(|&d| d >= s * (1.0 - tol))
    {
        Verdict::Optimal
    } else {
        Verdict::Suboptimal
    };
    Ok(OptimalityReport {
        value,
        max_violation,
        support_residuals,
        verdict,
        tol,
    })
}

// ---------------------------------------------------------------------------
// structural checks and design surgery

/// Whether the design's support count obeys the structural bound of its
/// problem: exactly m+1 points when the extended system (basis plus eta)
/// is a Chebyshev system, at most |extremal set| otherwise, and at most
/// k1 + k2 terms for exponential-sum discrimination.
pub fn support_bound_check(
    design: &Design,
    eta: &FixedMean,
    rival: &Family,
    space: &DesignSpace,
) -> Result<bool> {
    match rival {
        Family::Linear(basis) => {
            let mut labels: Vec<String> = basis.labels().to_vec();
            labels.push("eta".into());
            let mut funcs = basis.funcs().to_vec();
            let eta_c = eta.clone();
            funcs.push(std::sync::Arc::new(move |x| eta_c.eval(x)));
            let extended = Basis::custom(labels, funcs)?;
            if crate::models::check_chebyshev_system(&extended, space, 200) {
                return Ok(design.len() == basis.len() + 1);
            }
            let ba = remes_exchange(eta, basis, space, 1e-10, 100)?;
            let ext = extremal_set(eta, rival, &ba.theta_bar, space, 1e-6)?;
            Ok(design.len() <= ext.points.len())
        }
        Family::ExpSum { .. } => match eta {
            FixedMean::ExpSum(m) => Ok(design.len() <= m.k() + rival.dim() / 2),
            _ => Err(Error::BadModel {
                reason: "the exponential support bound needs an exponential-sum true mean".into(),
            }),
        },
    }
}

/// Shift `mass` of the weight onto `extra_point` (merging onto an existing
/// support point), leaving relative proportions of the rest unchanged.
pub fn modify_design(
    design: &Design,
    extra_point: f64,
    mass: f64,
    space: &DesignSpace,
) -> Result<Design> {
    if !(0.0..1.0).contains(&mass) {
        return Err(Error::BadWeights {
            reason: format!("extra mass must lie in [0, 1), got {mass}"),
        });
    }
    if !space.contains(extra_point) {
        return Err(Error::OutOfDomain {
            point: extra_point,
            lower: space.lower(),
            upper: space.upper(),
        });
    }
    if mass == 0.0 {
        return Ok(design.clone());
    }
    let mut pts: Vec<f64> = design.points().to_vec();
    let mut ws: Vec<f64> = design.weights().iter().map(|w| w * (1.0 - mass)).collect();
    let eps = 1e-12 * space.span().max(1.0);
    if let Some(i) = pts.iter().position(|&p| (p - extra_point).abs() <= eps) {
        ws[i] += mass;
    } else {
        pts.push(extra_point);
        ws.push(mass);
    }
    Design::new(&pts, &ws, space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ExpSumModel;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn space() -> DesignSpace {
        DesignSpace::new(-1.0, 1.0, 201).unwrap()
    }

    /// c x^2 + d x^3 as a fixed mean.
    fn cubic(c: f64, d: f64) -> FixedMean {
        FixedMean::polynomial(vec![0.0, 0.0, c, d])
    }

    fn line() -> Basis {
        Basis::monomials(2).unwrap()
    }

    fn assert_design(design: &Design, pts: &[f64], ws: &[f64], tol: f64) {
        assert_eq!(design.len(), pts.len(), "support size: {design:?}");
        for (got, want) in design.points().iter().zip(pts) {
            assert_abs_diff_eq!(got, want, epsilon = tol);
        }
        for (got, want) in design.weights().iter().zip(ws) {
            assert_abs_diff_eq!(got, want, epsilon = tol);
        }
    }

    // -- closed-form designs against independently derived exact values --

    #[test]
    fn chebyshev_design_for_pure_quadratic() {
        let d = solve_t_chebyshev(&cubic(1.0, 0.0), &line(), &space()).unwrap();
        assert_design(&d, &[-1.0, 0.0, 1.0], &[0.25, 0.5, 0.25], 1e-9);
    }

    #[test]
    fn chebyshev_design_for_equal_coefficients() {
        let d = solve_t_chebyshev(&cubic(1.0, 1.0), &line(), &space()).unwrap();
        let third = 1.0 / 3.0;
        assert_design(
            &d,
            &[-1.0, third, 1.0],
            &[1.0 / 6.0, 0.5, third],
            1e-9,
        );
    }

    #[test]
    fn chebyshev_design_for_dominant_quadratic() {
        let d = solve_t_chebyshev(&cubic(2.0, 1.0), &line(), &space()).unwrap();
        let s7 = 7.0_f64.sqrt();
        let den = 10.0 + 2.0 * s7;
        assert_design(
            &d,
            &[-1.0, (s7 - 2.0) / 3.0, 1.0],
            &[3.0 / den, (s7 + 5.0) / den, (s7 + 2.0) / den],
            1e-9,
        );
    }

    #[test]
    fn chebyshev_design_for_dominant_cubic() {
        let d = solve_t_chebyshev(&cubic(1.0, 2.0), &line(), &space()).unwrap();
        assert_design(
            &d,
            &[-0.75, 5.0 / 12.0, 1.0],
            &[1.0 / 6.0, 0.5, 1.0 / 3.0],
            1e-9,
        );
    }

    #[test]
    fn reflection_maps_designs_of_sign_flipped_cubic_terms() {
        // eta(-x) for (c, d) equals the (c, -d) mean, so the designs mirror
        let a = solve_t_chebyshev(&cubic(2.0, 1.0), &line(), &space()).unwrap();
        let b = solve_t_chebyshev(&cubic(2.0, -1.0), &line(), &space()).unwrap();
        let mirrored: Vec<f64> = a.points().iter().rev().map(|&x| -x).collect();
        let reversed: Vec<f64> = a.weights().iter().rev().copied().collect();
        assert_design(&b, &mirrored, &reversed, 1e-9);
    }

    #[test]
    fn alternation_count_guard_for_pure_cubic() {
        // The cubic's best linear approximation equioscillates four times,
        // one more than the closed form can use.
        let err = solve_t_chebyshev(&cubic(0.0, 1.0), &line(), &space()).unwrap_err();
        match err {
            Error::WrongAlternationCount { expected, found } => {
                assert_eq!(expected, 3);
                assert_eq!(found, 4);
            }
            other => panic!("expected alternation-count error, got {other}"),
        }
    }

    #[test]
    fn non_chebyshev_basis_is_rejected() {
        let even = Basis::custom(
            vec!["1".into(), "x^2".into()],
            vec![Arc::new(|_| 1.0), Arc::new(|x: f64| x * x)],
        )
        .unwrap();
        let err = solve_t_chebyshev(&cubic(0.0, 1.0), &even, &space()).unwrap_err();
        assert!(matches!(err, Error::NotChebyshev), "got {err}");
    }

    // -- polytope enumeration --

    #[test]
    fn cubic_discrimination_polytope_has_the_known_vertices() {
        let eta = FixedMean::polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        let rival = Family::linear(line());
        let p = enumerate_t_optimal(&eta, &rival, &space()).unwrap();
        assert_eq!(p.free_dimension, 1);
        assert_eq!(p.vertices.len(), 2);
        let want_support = [-1.0, -0.5, 0.5, 1.0];
        for (got, want) in p.support.iter().zip(&want_support) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
        let v0 = [0.0, 1.0 / 6.0, 0.5, 1.0 / 3.0];
        let v1 = [1.0 / 3.0, 0.5, 1.0 / 6.0, 0.0];
        for (got, want) in p.vertices[0].iter().zip(&v0) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
        for (got, want) in p.vertices[1].iter().zip(&v1) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
        // every slice of the segment is itself optimal
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let d = p.mixture(&[t, 1.0 - t], &space()).unwrap();
            let report = verify_t_optimal(&d, &eta, &rival, &space(), 1e-8).unwrap();
            assert!(report.is_optimal(), "t = {t}: {report:?}");
            assert_abs_diff_eq!(report.value, 0.0625, epsilon = 1e-10);
            assert!(p.contains(&d, 1e-7, 1e-7));
        }
    }

    #[test]
    fn unique_optimum_gives_a_single_vertex_matching_the_closed_form() {
        let eta = cubic(1.0, 0.0);
        let rival = Family::linear(line());
        let p = enumerate_t_optimal(&eta, &rival, &space()).unwrap();
        assert_eq!(p.free_dimension, 0);
        assert_eq!(p.vertices.len(), 1);
        let via_polytope = p.vertex_design(0, &space()).unwrap();
        let via_alternation = solve_t_chebyshev(&eta, &line(), &space()).unwrap();
        assert_design(
            &via_polytope,
            via_alternation.points(),
            via_alternation.weights(),
            1e-9,
        );
    }

    #[test]
    fn mixture_rejects_malformed_coefficients() {
        let eta = FixedMean::polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        let rival = Family::linear(line());
        let p = enumerate_t_optimal(&eta, &rival, &space()).unwrap();
        assert!(matches!(
            p.mixture(&[1.0], &space()),
            Err(Error::BadWeights { .. })
        ));
        assert!(matches!(
            p.mixture(&[1.5, -0.5], &space()),
            Err(Error::BadWeights { .. })
        ));
        assert!(matches!(
            p.mixture(&[0.7, 0.7], &space()),
            Err(Error::BadWeights { .. })
        ));
        assert!(matches!(
            p.vertex_design(2, &space()),
            Err(Error::BadWeights { .. })
        ));
    }

    #[test]
    fn membership_test_rejects_foreign_designs() {
        let eta = FixedMean::polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        let rival = Family::linear(line());
        let p = enumerate_t_optimal(&eta, &rival, &space()).unwrap();
        let uniform = Design::uniform(&[-1.0, 0.0, 1.0], &space()).unwrap();
        assert!(!p.contains(&uniform, 1e-6, 1e-6));
        // right support, wrong weights
        let d = Design::uniform(&[-1.0, -0.5, 0.5, 1.0], &space()).unwrap();
        assert!(!p.contains(&d, 1e-6, 1e-6));
    }

    #[test]
    fn heteroscedastic_cubic_polytope_matches_exact_values() {
        let obs = GaussianObsModel::new(
            FixedMean::polynomial(vec![0.0, 0.0, 0.0, 8.0]),
            Precision::one_minus_x2(1.0).unwrap(),
        );
        let rival = Family::linear(line());
        let p = enumerate_kl_optimal(&obs, &rival, &space()).unwrap();
        assert_eq!(p.free_dimension, 1);
        assert_eq!(p.vertices.len(), 2);
        let s2 = 2.0_f64.sqrt();
        let outer = 0.5 * (2.0 + s2).sqrt();
        let inner = 0.5 * (2.0 - s2).sqrt();
        let want_support = [-outer, -inner, inner, outer];
        for (got, want) in p.support.iter().zip(&want_support) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
        let v0 = [0.0, (2.0 - s2) / 4.0, s2 / 4.0, 0.5];
        let v1 = [0.5, s2 / 4.0, (2.0 - s2) / 4.0, 0.0];
        for (got, want) in p.vertices[0].iter().zip(&v0) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
        for (got, want) in p.vertices[1].iter().zip(&v1) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
        let mid = p.mixture(&[0.5, 0.5], &space()).unwrap();
        let report = verify_kl_optimal(&mid, &obs, &rival, &space(), 1e-7).unwrap();
        assert!(report.is_optimal(), "{report:?}");
        assert_abs_diff_eq!(report.value, 1.0, epsilon = 1e-8);
        let kl = crate::criteria::kl_value(&mid, &obs, &rival, &space()).unwrap();
        assert_abs_diff_eq!(kl.value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn enumeration_needs_linear_rival_under_varying_precision() {
        let obs = GaussianObsModel::new(
            FixedMean::exp_sum(ExpSumModel::new(vec![(1.0, 1.0), (1.0, 2.0)]).unwrap()),
            Precision::one_minus_x2(1.0).unwrap(),
        );
        let rival = Family::exp_sum(1).unwrap();
        let err = enumerate_kl_optimal(&obs, &rival, &space()).unwrap_err();
        assert!(matches!(err, Error::BadModel { .. }), "got {err}");
    }

    // -- exchange algorithms --

    #[test]
    fn exchange_reaches_the_cubic_optimum_face() {
        let eta = FixedMean::polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        let rival = Family::linear(line());
        let run = run_t_exchange(&eta, &rival, &space(), &ExchangeOpts::default()).unwrap();
        assert!(run.converged, "gap {}", run.report.max_violation);
        assert_abs_diff_eq!(run.report.value, 0.0625, epsilon = 1e-6);
        assert!(run.report.is_optimal(), "{:?}", run.report);
        let p = enumerate_t_optimal(&eta, &rival, &space()).unwrap();
        assert!(
            p.contains(&run.design, 1e-3, 1e-4),
            "design {:?} not on the optimal face",
            run.design
        );
    }

    #[test]
    fn exchange_detects_a_flat_criterion() {
        // the rival family reproduces the true line exactly
        let eta = FixedMean::polynomial(vec![0.0, 1.0]);
        let err =
            solve_t_exchange(&eta, &Family::linear(line()), &space(), &ExchangeOpts::default())
                .unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }), "got {err}");
    }

    #[test]
    fn exchange_budget_exhaustion_is_reported() {
        let eta = FixedMean::polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        let rival = Family::linear(Basis::monomials(3).unwrap());
        let opts = ExchangeOpts {
            max_iter: 2,
            tol: 1e-12,
            ..ExchangeOpts::default()
        };
        let err = solve_t_exchange(&eta, &rival, &space(), &opts).unwrap_err();
        match err {
            Error::NoConvergence { iterations, gap } => {
                assert_eq!(iterations, 2);
                assert!(gap > 0.0);
            }
            other => panic!("expected a convergence failure, got {other}"),
        }
        let run = run_t_exchange(&eta, &rival, &space(), &opts).unwrap();
        assert!(!run.converged);
        assert_eq!(run.iterations, 2);
        assert!(run.design.len() >= 3);
    }

    #[test]
    fn exchange_options_are_validated() {
        let eta = cubic(1.0, 0.0);
        let rival = Family::linear(line());
        let bad = ExchangeOpts {
            max_iter: 0,
            ..ExchangeOpts::default()
        };
        assert!(matches!(
            solve_t_exchange(&eta, &rival, &space(), &bad),
            Err(Error::BadSpec { .. })
        ));
        let bad = ExchangeOpts {
            tol: -1.0,
            ..ExchangeOpts::default()
        };
        assert!(matches!(
            solve_t_exchange(&eta, &rival, &space(), &bad),
            Err(Error::BadSpec { .. })
        ));
    }

    #[test]
    fn exchange_recovers_a_published_exponential_design() {
        // two decaying exponentials against a single-term rival
        let eta = FixedMean::exp_sum(ExpSumModel::new(vec![(1.0, -1.0), (1.0, -2.0)]).unwrap());
        let rival = Family::exp_sum(1).unwrap();
        let design = solve_t_exchange(&eta, &rival, &space(), &ExchangeOpts::default()).unwrap();
        assert_design(
            &design,
            &[-1.0, 0.6, 1.0],
            &[0.645, 0.246, 0.109],
            2e-2,
        );
        let report = verify_t_optimal(&design, &eta, &rival, &space(), 1e-3).unwrap();
        assert!(report.is_optimal(), "{report:?}");
    }

    #[test]
    fn kl_exchange_reaches_the_heteroscedastic_optimum() {
        let obs = GaussianObsModel::new(
            FixedMean::polynomial(vec![0.0, 0.0, 0.0, 8.0]),
            Precision::one_minus_x2(1.0).unwrap(),
        );
        let rival = Family::linear(line());
        let run = run_kl_exchange(&obs, &rival, &space(), &ExchangeOpts::default()).unwrap();
        assert!(run.converged, "gap {}", run.report.max_violation);
        assert_abs_diff_eq!(run.report.value, 1.0, epsilon = 1e-6);
        let s2 = 2.0_f64.sqrt();
        let outer = 0.5 * (2.0 + s2).sqrt();
        let inner = 0.5 * (2.0 - s2).sqrt();
        for &x in run.design.points() {
            let nearest = [-outer, -inner, inner, outer]
                .iter()
                .map(|&t| (x - t).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-3, "support point {x} off the known set");
        }
        let p = enumerate_kl_optimal(&obs, &rival, &space()).unwrap();
        assert!(p.contains(&run.design, 1e-3, 1e-4));
    }

    #[test]
    fn constant_precision_reduces_the_kl_exchange_to_t() {
        let eta = cubic(1.0, 0.0);
        let rival = Family::linear(line());
        let obs = GaussianObsModel::new(eta.clone(), Precision::constant(1.0).unwrap());
        let t = solve_t_exchange(&eta, &rival, &space(), &ExchangeOpts::default()).unwrap();
        let kl = solve_kl_exchange(&obs, &rival, &space(), &ExchangeOpts::default()).unwrap();
        assert_design(&kl, t.points(), t.weights(), 1e-12);
    }

    // -- determinant-ratio designs --

    #[test]
    fn ds_design_for_linear_vs_cubic_matches_the_known_solution() {
        let pair = NestedPair::linear(
            Basis::monomials(4).unwrap(),
            2,
            nalgebra::dvector![0.0, 1.0],
        )
        .unwrap();
        let design = solve_ds(&pair, &space(), 2, &ExchangeOpts::default()).unwrap();
        let r6 = 1.0 / 6.0_f64.sqrt();
        assert_design(
            &design,
            &[-1.0, -r6, r6, 1.0],
            &[0.2, 0.3, 0.3, 0.2],
            5e-3,
        );
        let report = verify_ds_optimal(&design, &pair, &space(), 1e-4).unwrap();
        assert!(report.is_optimal(), "{report:?}");
        assert!(report.max_violation <= 2.0 * 1e-4);
        for &lvl in &report.support_residuals {
            assert_abs_diff_eq!(lvl, 2.0, epsilon = 1e-2);
        }
    }

    #[test]
    fn ds_design_for_the_exponential_pair() {
        // testing whether the second exponential term is present
        let family = Family::exp_sum(2).unwrap();
        let theta = nalgebra::dvector![1.0, 2.0, 1.0, 4.0];
        let pair = NestedPair::local(family, theta, vec![2]).unwrap();
        let design = solve_ds(&pair, &space(), 1, &ExchangeOpts::default()).unwrap();
        assert_design(
            &design,
            &[-1.0, -0.859, -0.394, 0.717],
            &[0.087, 0.197, 0.257, 0.459],
            2e-2,
        );
    }

    #[test]
    fn ds_rejects_a_mismatched_subset_size() {
        let pair = NestedPair::linear(
            Basis::monomials(4).unwrap(),
            2,
            nalgebra::dvector![0.0, 1.0],
        )
        .unwrap();
        assert!(matches!(
            solve_ds(&pair, &space(), 1, &ExchangeOpts::default()),
            Err(Error::BadModel { .. })
        ));
    }

    #[test]
    fn ds_verification_flags_a_uniform_design() {
        let pair = NestedPair::linear(
            Basis::monomials(4).unwrap(),
            2,
            nalgebra::dvector![0.0, 1.0],
        )
        .unwrap();
        let design = Design::uniform(&[-1.0, -0.5, 0.0, 0.5, 1.0], &space()).unwrap();
        let report = verify_ds_optimal(&design, &pair, &space(), 1e-4).unwrap();
        assert_eq!(report.verdict, Verdict::Suboptimal);
        assert!(report.max_violation > 0.0);
    }

    // -- verification --

    #[test]
    fn verification_flags_a_suboptimal_design() {
        let eta = FixedMean::polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        let rival = Family::linear(Basis::monomials(3).unwrap());
        let uniform = Design::uniform(&[-1.0, -0.3, 0.4, 1.0], &space()).unwrap();
        let report = verify_t_optimal(&uniform, &eta, &rival, &space(), 1e-6).unwrap();
        assert_eq!(report.verdict, Verdict::Suboptimal);
        assert!(report.max_violation > 0.0);
    }

    #[test]
    fn verification_is_inconclusive_on_a_flat_criterion() {
        let eta = FixedMean::polynomial(vec![0.0, 1.0]);
        let rival = Family::linear(line());
        let d = Design::uniform(&[-1.0, 0.0, 1.0], &space()).unwrap();
        let report = verify_t_optimal(&d, &eta, &rival, &space(), 1e-6).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
    }

    // -- structural support bounds and design surgery --

    #[test]
    fn support_bound_for_a_chebyshev_extended_system() {
        let eta = cubic(1.0, 0.0);
        let rival = Family::linear(line());
        let opt = solve_t_chebyshev(&eta, &line(), &space()).unwrap();
        assert!(support_bound_check(&opt, &eta, &rival, &space()).unwrap());
        let too_many = Design::uniform(&[-1.0, -0.5, 0.5, 1.0], &space()).unwrap();
        assert!(!support_bound_check(&too_many, &eta, &rival, &space()).unwrap());
        let too_few = Design::uniform(&[-1.0, 1.0], &space()).unwrap();
        assert!(!support_bound_check(&too_few, &eta, &rival, &space()).unwrap());
    }

    #[test]
    fn support_bound_falls_back_to_the_extremal_set() {
        // {1, x, x^3} is not a Chebyshev system, so the bound comes from
        // the four-point extremal set of the best approximation
        let eta = cubic(0.0, 1.0);
        let rival = Family::linear(line());
        let four = Design::uniform(&[-1.0, -0.5, 0.5, 1.0], &space()).unwrap();
        assert!(support_bound_check(&four, &eta, &rival, &space()).unwrap());
        let five = Design::uniform(&[-1.0, -0.5, 0.0, 0.5, 1.0], &space()).unwrap();
        assert!(!support_bound_check(&five, &eta, &rival, &space()).unwrap());
    }

    #[test]
    fn support_bound_for_exponential_discrimination() {
        let eta = FixedMean::exp_sum(ExpSumModel::new(vec![(1.0, -1.0), (1.0, -2.0)]).unwrap());
        let rival = Family::exp_sum(1).unwrap();
        let three = Design::uniform(&[-1.0, 0.0, 1.0], &space()).unwrap();
        assert!(support_bound_check(&three, &eta, &rival, &space()).unwrap());
        let four = Design::uniform(&[-1.0, -0.5, 0.5, 1.0], &space()).unwrap();
        assert!(!support_bound_check(&four, &eta, &rival, &space()).unwrap());
        let poly = cubic(1.0, 0.0);
        assert!(matches!(
            support_bound_check(&three, &poly, &rival, &space()),
            Err(Error::BadModel { .. })
        ));
    }

    #[test]
    fn modifying_a_design_grafts_mass_at_a_new_point() {
        let base = Design::new(
            &[-0.5, 0.5, 1.0],
            &[1.0 / 6.0, 0.5, 1.0 / 3.0],
            &space(),
        )
        .unwrap();
        let d = modify_design(&base, -1.0, 0.02, &space()).unwrap();
        assert_design(
            &d,
            &[-1.0, -0.5, 0.5, 1.0],
            &[0.02, 0.98 / 6.0, 0.49, 0.98 / 3.0],
            1e-12,
        );
    }

    #[test]
    fn modifying_a_design_merges_onto_an_existing_point() {
        let base = Design::new(&[-1.0, 0.0, 1.0], &[0.25, 0.5, 0.25], &space()).unwrap();
        let d = modify_design(&base, 0.0, 0.1, &space()).unwrap();
        assert_design(&d, &[-1.0, 0.0, 1.0], &[0.225, 0.55, 0.225], 1e-12);
        let unchanged = modify_design(&base, 0.5, 0.0, &space()).unwrap();
        assert_design(&unchanged, base.points(), base.weights(), 0.0);
    }

    #[test]
    fn modify_design_validates_its_inputs() {
        let base = Design::new(&[-1.0, 1.0], &[0.5, 0.5], &space()).unwrap();
        assert!(matches!(
            modify_design(&base, 0.0, 1.0, &space()),
            Err(Error::BadWeights { .. })
        ));
        assert!(matches!(
            modify_design(&base, 0.0, -0.1, &space()),
            Err(Error::BadWeights { .. })
        ));
        assert!(matches!(
            modify_design(&base, 2.0, 0.1, &space()),
            Err(Error::OutOfDomain { .. })
        ));
    }

    // -- combinatorial helpers --

    #[test]
    fn combination_visitor_is_exhaustive_and_ordered() {
        let mut seen: Vec<Vec<usize>> = Vec::new();
        for_each_combination(5, 3, &mut |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 10);
        let mut sorted = seen.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, seen);
        assert_eq!(seen[0], vec![0, 1, 2]);
        assert_eq!(seen[9], vec![2, 3, 4]);
        assert_eq!(binomial(5, 3), 10);
        assert_eq!(binomial(50, 2), 1225);
        assert_eq!(binomial(3, 5), 0);
    }
}
