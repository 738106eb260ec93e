//! Best uniform approximation.
//!
//! Four routes to the same quantity, used to cross-check each other:
//! a Remes exchange for linear families over Chebyshev systems
//! ([`remes_exchange`]), a grid-restricted minimax oracle
//! ([`grid_minimax`]), a multi-start minimax solver for exponential-sum
//! families ([`nonlinear_best_approx`]), and extraction of the points where
//! the residual attains its sup-norm ([`extremal_set`]).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, golden_max};
use crate::models::{check_chebyshev_system, Basis, Family, FixedMean, Precision, ThetaBox};
use crate::{DesignSpace, Error, Result};

/// Residual below this (relative to the target scale) counts as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// One Remes iteration: coefficients, equioscillation level, reference set.
#[derive(Clone, Debug)]
pub struct RemesStep {
    pub theta: DVector<f64>,
    pub level: f64,
    pub reference: Vec<f64>,
}

/// Result of a best-approximation run.
#[derive(Clone, Debug)]
pub struct BestApprox {
    /// Coefficients of the best approximant found.
    pub theta_bar: DVector<f64>,
    /// Sup-norm of the residual target - approximant.
    pub sup_error: f64,
    /// Points where |residual| attains the sup (empty when the residual
    /// vanishes identically).
    pub extremal_points: Vec<f64>,
    /// Residual signs at those points.
    pub residual_signs: Vec<i8>,
    pub iterations: usize,
    /// Per-iteration history (filled by the Remes path only).
    pub trace: Vec<RemesStep>,
}

/// Points where |residual| comes within a factor (1 - tol) of its sup.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalSet {
    pub points: Vec<f64>,
    /// True when the residual is zero at working precision; `points` is
    /// then empty rather than the whole interval.
    pub degenerate: bool,
}

/// Rewrite a precision-weighted approximation problem as an unweighted one:
/// target sqrt(lambda(x)) * eta(x) against the basis sqrt(lambda(x)) * f_i(x).
///
/// Minimax problems under a positive precision lambda reduce to plain
/// minimax this way, because sup lambda (eta - g)^2 = (sup |sqrt(lambda) (eta - g)|)^2.
pub fn weighted_problem(
    eta: &FixedMean,
    basis: &Basis,
    precision: &Precision,
) -> (FixedMean, Basis) {
    let w = {
        let p = precision.clone();
        move |x: f64| p.at(x).max(0.0).sqrt()
    };
    let wt = {
        let e = eta.clone();
        let w = w.clone();
        Arc::new(move |x: f64| w(x) * e.eval(x)) as crate::models::ScalarFn
    };
    let target = FixedMean::custom("sqrt(lambda)*eta", wt);
    let labels = basis
        .labels()
        .iter()
        .map(|l| format!("sqrt(lambda)*{l}"))
        .collect();
    let funcs = basis
        .funcs()
        .iter()
        .map(|f| {
            let f = f.clone();
            let w = w.clone();
            Arc::new(move |x: f64| w(x) * f(x)) as crate::models::ScalarFn
        })
        .collect();
    let wbasis = Basis::custom(labels, funcs).expect("same arity as input basis");
    (target, wbasis)
}

fn scan_grid(space: &DesignSpace, at_least: usize) -> Vec<f64> {
    space.grid_n(space.grid_points().max(at_least))
}

/// Largest |target| over the grid; sets the scale for degeneracy decisions.
fn target_scale(target: &FixedMean, xs: &[f64]) -> f64 {
    xs.iter()
        .map(|&x| target.eval(x).abs())
        .fold(0.0, f64::max)
        .max(1.0)
}

/// Local maximizers of |f| over the grid, each polished by golden section
/// over the surrounding bracket when `polish` is set. Returns (x, f(x))
/// in increasing x order with near-duplicates merged.
fn abs_extrema(f: &dyn Fn(f64) -> f64, xs: &[f64], polish: Option<f64>) -> Vec<(f64, f64)> {
    let n = xs.len();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mag: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || mag[i] >= mag[i - 1];
        let right_ok = i + 1 == n || mag[i] >= mag[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        // skip plateau repeats: only take the first grid point of a flat run
        if i > 0 && mag[i] == mag[i - 1] {
            continue;
        }
        let (x, v) = match polish {
            Some(tol) => {
                let a = if i == 0 { xs[0] } else { xs[i - 1] };
                let b = if i + 1 == n { xs[n - 1] } else { xs[i + 1] };
                if a == b {
                    (xs[i], vals[i])
                } else {
                    let (x, _) = golden_max(a, b, tol, |x| f(x).abs());
                    let x = linalg::parabolic_refine_max(&|t| f(t).abs(), x, a, b);
                    (x, f(x))
                }
            }
            None => (xs[i], vals[i]),
        };
        out.push((x, v));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    // merge points the polish pushed together
    let gap = if n > 1 { 0.5 * (xs[1] - xs[0]) } else { 0.0 };
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(out.len());
    for (x, v) in out {
        match merged.last_mut() {
            Some(last) if (x - last.0).abs() <= gap => {
                if v.abs() > last.1.abs() {
                    *last = (x, v);
                }
            }
            _ => merged.push((x, v)),
        }
    }
    merged
}

/// Strongest point of each same-sign run, then trim weaker endpoints until
/// at most `cap` points remain. Alternating signs are preserved and the
/// global maximum is never dropped.
fn alternating_subset(ext: &[(f64, f64)], cap: usize) -> Vec<(f64, f64)> {
    let mut runs: Vec<(f64, f64)> = Vec::new();
    for &(x, v) in ext {
        if v == 0.0 {
            continue;
        }
        match runs.last_mut() {
            Some(last) if last.1.signum() == v.signum() => {
                if v.abs() > last.1.abs() {
                    *last = (x, v);
                }
            }
            _ => runs.push((x, v)),
        }
    }
    while runs.len() > cap {
        let first = runs.first().map(|p| p.1.abs()).unwrap_or(0.0);
        let last = runs.last().map(|p| p.1.abs()).unwrap_or(0.0);
        if first <= last {
            runs.remove(0);
        } else {
            runs.pop();
        }
    }
    runs
}

/// Solve target(x_j) - theta' f(x_j) = (-1)^j h on the reference set.
fn solve_reference(
    target: &FixedMean,
    basis: &Basis,
    reference: &[f64],
) -> Result<(DVector<f64>, f64)> {
    let m = basis.len();
    let q = reference.len();
    let mut a = DMatrix::zeros(q, m + 1);
    let mut b = DVector::zeros(q);
    for (j, &x) in reference.iter().enumerate() {
        let f = basis.eval(x);
        for i in 0..m {
            a[(j, i)] = f[i];
        }
        a[(j, m)] = if j % 2 == 0 { 1.0 } else { -1.0 };
        b[j] = target.eval(x);
    }
    let sol = if q == m + 1 {
        linalg::solve(&a, &b)
    } else {
        None
    }
    .unwrap_or_else(|| linalg::solve_min_norm(&a, &b).0);
    if !sol.iter().all(|v| v.is_finite()) {
        return Err(Error::Degenerate {
            reason: "reference system produced non-finite coefficients".into(),
        });
    }
    let theta = DVector::from_iterator(m, sol.iter().take(m).copied());
    Ok((theta, sol[m]))
}

fn ls_fit(target: &FixedMean, basis: &Basis, xs: &[f64]) -> DVector<f64> {
    let a = DMatrix::from_fn(xs.len(), basis.len(), |i, j| basis.eval(xs[i])[j]);
    let b = DVector::from_iterator(xs.len(), xs.iter().map(|&x| target.eval(x)));
    linalg::solve_min_norm(&a, &b).0
}

fn chebyshev_points(space: &DesignSpace, n: usize) -> Vec<f64> {
    let mid = 0.5 * (space.lower() + space.upper());
    let half = 0.5 * space.span();
    (0..n)
        .map(|j| mid - half * (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos())
        .collect()
}

fn build_result(
    theta: DVector<f64>,
    sup: f64,
    points: Vec<(f64, f64)>,
    iterations: usize,
    trace: Vec<RemesStep>,
) -> BestApprox {
    BestApprox {
        theta_bar: theta,
        sup_error: sup,
        extremal_points: points.iter().map(|p| p.0).collect(),
        residual_signs: points
            .iter()
            .map(|p| if p.1 >= 0.0 { 1 } else { -1 })
            .collect(),
        iterations,
        trace,
    }
}

/// Best uniform approximation of `target` from the span of a Chebyshev
/// system, by multi-point Remes exchange with golden-section refinement of
/// the extrema. Terminates when the global sup-norm agrees with the
/// reference equioscillation level within `tol` (relative).
pub fn remes_exchange(
    target: &FixedMean,
    basis: &Basis,
    space: &DesignSpace,
    tol: f64,
    max_iter: usize,
) -> Result<BestApprox> {
    if !(tol > 0.0) {
        return Err(Error::BadModel {
            reason: format!("tolerance must be positive, got {tol}"),
        });
    }
    if !check_chebyshev_system(basis, space, 100) {
        return Err(Error::NotChebyshev);
    }
    let m = basis.len();
    let xs = scan_grid(space, 40 * (m + 2) + 1);
    let scale = target_scale(target, &xs);
    let polish = Some(1e-10 * space.span().max(1.0));

    // start from the dense least-squares fit: its residual already has
    // nearly-alternating extrema, which seeds a well-conditioned reference
    let mut theta = ls_fit(target, basis, &xs);
    let mut trace: Vec<RemesStep> = Vec::new();
    let mut gap = f64::INFINITY;
    for k in 1..=max_iter.max(1) {
        let fam = Family::linear(basis.clone());
        let r = {
            let t = theta.clone();
            move |x: f64| target.eval(x) - fam.eval(&t, x).expect("dims fixed")
        };
        let ext = abs_extrema(&r, &xs, polish);
        let sup = ext.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        if sup <= DEGENERACY_TOL * scale {
            // target lies in the span: nothing to equioscillate
            return Ok(build_result(theta, sup, Vec::new(), k, trace));
        }
        let mut reference = alternating_subset(&ext, m + 1);
        if reference.len() < m + 1 {
            // flat or one-sided residual; fall back to a spread reference
            let pts = chebyshev_points(space, m + 1);
            reference = pts.iter().map(|&x| (x, r(x))).collect();
        }
        let level = {
            let (theta_new, h) = solve_reference(target, basis, &reference.iter().map(|p| p.0).collect::<Vec<_>>())?;
            theta = theta_new;
            h.abs()
        };
        trace.push(RemesStep {
            theta: theta.clone(),
            level,
            reference: reference.iter().map(|p| p.0).collect(),
        });
        // measure the new iterate
        let fam = Family::linear(basis.clone());
        let r = {
            let t = theta.clone();
            move |x: f64| target.eval(x) - fam.eval(&t, x).expect("dims fixed")
        };
        let ext = abs_extrema(&r, &xs, polish);
        let sup = ext.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        gap = sup - level;
        if gap.abs() <= tol * sup.max(1.0) {
            // report every point attaining the sup, not just the working
            // reference: symmetric problems can have more than m + 1
            let pts: Vec<(f64, f64)> = ext
                .into_iter()
                .filter(|p| p.1.abs() >= sup * (1.0 - 1e-6))
                .collect();
            return Ok(build_result(theta, sup, pts, k, trace));
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        gap,
    })
}

/// Greedy coordinate (compass) descent on an objective; used to refine
/// minimax fits where no gradient is available.
fn compass_min(
    g: &dyn Fn(&DVector<f64>) -> f64,
    start: &DVector<f64>,
    bounds: Option<&ThetaBox>,
    max_eval: usize,
) -> (DVector<f64>, f64) {
    let n = start.len();
    let clamp = |v: DVector<f64>| match bounds {
        Some(b) => b.clamp(&v),
        None => v,
    };
    let mut x = clamp(start.clone());
    let mut fx = g(&x);
    let mut steps: Vec<f64> = x.iter().map(|t| 0.1 * (1.0 + t.abs())).collect();
    let mut evals = 0;
    while evals < max_eval && steps.iter().any(|&s| s > 1e-10) {
        let mut moved = false;
        for i in 0..n {
            if steps[i] <= 1e-10 {
                continue;
            }
            for dir in [1.0, -1.0] {
                let mut xn = x.clone();
                xn[i] += dir * steps[i];
                let xn = clamp(xn);
                let fn_ = g(&xn);
                evals += 1;
                if fn_ < fx {
                    x = xn;
                    fx = fn_;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
    (x, fx)
}

/// Brute-force minimax over a fixed grid: an independent upper-bound
/// certificate on the best-approximation value. Linear families run a
/// discrete point exchange; exponential families run multi-start least
/// squares followed by compass refinement of the max residual. Best-effort:
/// always returns the best iterate found.
pub fn grid_minimax(
    target: &FixedMean,
    family: &Family,
    space: &DesignSpace,
    grid_n: usize,
    bounds: Option<&ThetaBox>,
) -> BestApprox {
    let xs = space.grid_n(grid_n.max(1001));
    let scale = target_scale(target, &xs);
    match family {
        Family::Linear(basis) => {
            let m = basis.len();
            let mut theta = ls_fit(target, basis, &xs);
            let mut iterations = 0;
            for k in 1..=200 {
                iterations = k;
                let r = |x: f64| target.eval(x) - theta.dot(&basis.eval(x));
                let ext = abs_extrema(&r, &xs, None);
                let sup = ext.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
                if sup <= DEGENERACY_TOL * scale {
                    return build_result(theta, sup, Vec::new(), k, Vec::new());
                }
                let reference = alternating_subset(&ext, m + 1);
                if reference.len() < m + 1 {
                    break;
                }
                let pts: Vec<f64> = reference.iter().map(|p| p.0).collect();
                let Ok((theta_new, h)) = solve_reference(target, basis, &pts) else {
                    break;
                };
                theta = theta_new;
                let r = |x: f64| target.eval(x) - theta.dot(&basis.eval(x));
                let sup = xs.iter().map(|&x| r(x).abs()).fold(0.0, f64::max);
                if sup - h.abs() <= 1e-12 * sup.max(1.0) {
                    break;
                }
            }
            let r = |x: f64| target.eval(x) - theta.dot(&basis.eval(x));
            let ext = abs_extrema(&r, &xs, None);
            let sup = ext.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
            let pts: Vec<(f64, f64)> = ext
                .into_iter()
                .filter(|p| p.1.abs() >= sup * (1.0 - 1e-6))
                .collect();
            build_result(theta, sup, pts, iterations, Vec::new())
        }
        Family::ExpSum { .. } => {
            let bx = bounds
                .cloned()
                .unwrap_or_else(|| family.bounds().expect("exp family has bounds").clone());
            // coarse grid for the least-squares stage
            let step = (xs.len() / 201).max(1);
            let coarse: Vec<f64> = xs.iter().step_by(step).copied().collect();
            let maxres = |t: &DVector<f64>| {
                xs.iter()
                    .map(|&x| (target.eval(x) - family.eval(t, x).expect("dims fixed")).abs())
                    .fold(0.0, f64::max)
            };
            let mut best: Option<(DVector<f64>, f64)> = None;
            let mut starts = bx.halton_points(8);
            starts.push(family.zero_theta());
            for s in starts {
                let (tls, _) = fit_family_ls(target, family, &coarse, &s, &bx);
                // simplex handles the kinks of the max residual; the compass
                // pass then polishes coordinate-wise
                let (tnm, _) =
                    linalg::nelder_mead(&maxres, &tls, bx.lower(), bx.upper(), 2000);
                let (t, v) = compass_min(&maxres, &tnm, Some(&bx), 20_000);
                if best.as_ref().map_or(true, |b| v < b.1) {
                    best = Some((t, v));
                }
            }
            let (theta, sup) = best.expect("at least one start");
            let r = |x: f64| target.eval(x) - family.eval(&theta, x).expect("dims fixed");
            if sup <= DEGENERACY_TOL * scale {
                return build_result(theta, sup, Vec::new(), 1, Vec::new());
            }
            let ext = abs_extrema(&r, &xs, None);
            let pts: Vec<(f64, f64)> = ext
                .into_iter()
                .filter(|p| p.1.abs() >= sup * (1.0 - 1e-6))
                .collect();
            build_result(theta, sup, pts, 1, Vec::new())
        }
    }
}

/// Least-squares fit of a family to the target over grid points, starting
/// from `start`, clamped to `bx`.
fn fit_family_ls(
    target: &FixedMean,
    family: &Family,
    xs: &[f64],
    start: &DVector<f64>,
    bx: &ThetaBox,
) -> (DVector<f64>, f64) {
    let resid = |t: &DVector<f64>| {
        DVector::from_iterator(
            xs.len(),
            xs.iter()
                .map(|&x| family.eval(t, x).expect("dims fixed") - target.eval(x)),
        )
    };
    let jac = |t: &DVector<f64>| {
        let mut m = DMatrix::zeros(xs.len(), t.len());
        for (i, &x) in xs.iter().enumerate() {
            m.row_mut(i)
                .copy_from(&family.gradient(t, x).expect("dims fixed").transpose());
        }
        m
    };
    linalg::levenberg_marquardt(&resid, &jac, start, bx.lower(), bx.upper(), 200)
}

/// Multi-start best uniform approximation for nonlinear (exponential-sum)
/// families: least-squares fit per start, then a Remes-like equioscillation
/// polish restricted to the alternation count the residual actually has.
/// Linear families delegate to [`remes_exchange`].
pub fn nonlinear_best_approx(
    target: &FixedMean,
    family: &Family,
    space: &DesignSpace,
    starts: usize,
) -> Result<BestApprox> {
    let basis = match family {
        Family::Linear(b) => Some(b.clone()),
        Family::ExpSum { .. } => None,
    };
    if let Some(b) = basis {
        return remes_exchange(target, &b, space, 1e-10, 60);
    }
    let starts = starts.max(8);
    let bx = family.bounds().expect("exp family has bounds").clone();
    let xs = scan_grid(space, 2001);
    let scale = target_scale(target, &xs);
    let polish = Some(1e-10 * space.span().max(1.0));
    let step = (xs.len() / 201).max(1);
    let coarse: Vec<f64> = xs.iter().step_by(step).copied().collect();

    let mut best: Option<BestApprox> = None;
    let mut start_pts = bx.halton_points(starts);
    start_pts.push(family.zero_theta());
    for s in start_pts {
        let (mut theta, _) = fit_family_ls(target, family, &coarse, &s, &bx);
        let mut iterations = 0;
        // outer loop: re-extract extrema, solve the equioscillation system
        // on them by damped Gauss-Newton, repeat (point exchange)
        for outer in 1..=30 {
            iterations = outer;
            let r = |t: &DVector<f64>, x: f64| {
                target.eval(x) - family.eval(t, x).expect("dims fixed")
            };
            let rt = {
                let t = theta.clone();
                move |x: f64| r(&t, x)
            };
            let ext = abs_extrema(&rt, &xs, polish);
            let sup = ext.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
            if sup <= DEGENERACY_TOL * scale {
                break;
            }
            let reference = alternating_subset(&ext, family.dim() + 1);
            let q = reference.len();
            if q < 2 {
                break;
            }
            // F(theta, h) = r(x_j) - s_j h over the reference
            let signs: Vec<f64> = reference.iter().map(|p| p.1.signum()).collect();
            let pts: Vec<f64> = reference.iter().map(|p| p.0).collect();
            let fvec = |th: &DVector<f64>| {
                let t = DVector::from_iterator(family.dim(), th.iter().take(family.dim()).copied());
                let h = th[family.dim()];
                DVector::from_iterator(
                    q,
                    pts.iter()
                        .zip(&signs)
                        .map(|(&x, &s)| r(&t, x) - s * h),
                )
            };
            let jvec = |th: &DVector<f64>| {
                let t = DVector::from_iterator(family.dim(), th.iter().take(family.dim()).copied());
                let mut m = DMatrix::zeros(q, family.dim() + 1);
                for (j, (&x, &s)) in pts.iter().zip(&signs).enumerate() {
                    let g = family.gradient(&t, x).expect("dims fixed");
                    for i in 0..family.dim() {
                        m[(j, i)] = -g[i];
                    }
                    m[(j, family.dim())] = -s;
                }
                m
            };
            let mut th0 = DVector::zeros(family.dim() + 1);
            th0.rows_mut(0, family.dim()).copy_from(&theta);
            th0[family.dim()] = reference
                .iter()
                .map(|p| p.1.abs())
                .sum::<f64>()
                / q as f64;
            let mut lo = bx.lower().to_vec();
            let mut hi = bx.upper().to_vec();
            lo.push(0.0);
            hi.push(f64::INFINITY);
            let (thn, _) = linalg::levenberg_marquardt(&fvec, &jvec, &th0, &lo, &hi, 60);
            let theta_new = DVector::from_iterator(
                family.dim(),
                thn.iter().take(family.dim()).copied(),
            );
            let level = thn[family.dim()];
            let rn = {
                let t = theta_new.clone();
                move |x: f64| r(&t, x)
            };
            let sup_new = xs.iter().map(|&x| rn(x).abs()).fold(0.0, f64::max);
            if sup_new <= sup {
                theta = theta_new;
                if sup_new - level <= 1e-9 * sup_new.max(1.0) {
                    break;
                }
            } else {
                break;
            }
        }
        let rt = {
            let t = theta.clone();
            move |x: f64| target.eval(x) - family.eval(&t, x).expect("dims fixed")
        };
        let ext = abs_extrema(&rt, &xs, polish);
        let sup = ext.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        let pts: Vec<(f64, f64)> = if sup <= DEGENERACY_TOL * scale {
            Vec::new()
        } else {
            ext.into_iter()
                .filter(|p| p.1.abs() >= sup * (1.0 - 1e-6))
                .collect()
        };
        let cand = build_result(theta, sup, pts, iterations, Vec::new());
        if best
            .as_ref()
            .map_or(true, |b| cand.sup_error < b.sup_error)
        {
            best = Some(cand);
        }
    }
    best.filter(|b| b.sup_error.is_finite())
        .ok_or(Error::NoConvergence {
            iterations: starts,
            gap: f64::INFINITY,
        })
}

/// All points where |target - family(theta_bar)| reaches its sup-norm
/// within a relative factor (1 - tol), golden-polished and increasing.
pub fn extremal_set(
    target: &FixedMean,
    family: &Family,
    theta_bar: &DVector<f64>,
    space: &DesignSpace,
    tol: f64,
) -> Result<ExtremalSet> {
    family.eval(theta_bar, space.lower())?; // dimension check
    let xs = scan_grid(space, 4001);
    let scale = target_scale(target, &xs);
    let r = |x: f64| target.eval(x) - family.eval(theta_bar, x).expect("dims checked");
    let ext = abs_extrema(&r, &xs, Some(1e-10 * space.span().max(1.0)));
    let sup = ext.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if sup <= DEGENERACY_TOL * scale {
        return Ok(ExtremalSet {
            points: Vec::new(),
            degenerate: true,
        });
    }
    let points = ext
        .into_iter()
        .filter(|p| p.1.abs() >= sup * (1.0 - tol))
        .map(|p| p.0)
        .collect();
    Ok(ExtremalSet {
        points,
        degenerate: false,
    })
}
