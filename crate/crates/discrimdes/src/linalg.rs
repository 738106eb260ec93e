//! Dense linear algebra helpers and small numeric utilities.
//!
//! Everything here wraps nalgebra; the helpers fix the fallback behavior
//! (LU first, SVD minimum-norm when rank deficient) so callers get one
//! consistent contract.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Solve A x = b by LU; `None` when A is singular at working precision.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

/// Minimum-norm least-squares solution of A x = b via SVD.
///
/// Returns the solution and a flag that is true when the solution is not
/// unique, i.e. rank(A) < ncols (relative to [`RANK_TOL`]).
pub fn solve_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = RANK_TOL * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd.solve(b, eps).expect("svd.solve with computed u/v");
    (x, rank < a.ncols())
}

pub fn det(a: &DMatrix<f64>) -> f64 {
    a.determinant()
}

pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().try_inverse()
}

/// Gram matrix sum_i w_i v_i v_i' for column vectors v_i.
pub fn weighted_gram(cols: &[DVector<f64>], weights: &[f64]) -> DMatrix<f64> {
    let dim = cols.first().map_or(0, |c| c.len());
    let mut m = DMatrix::zeros(dim, dim);
    for (v, &w) in cols.iter().zip(weights) {
        m.syger(w, v, v, 1.0);
    }
    // syger fills the lower triangle; mirror it
    for i in 0..dim {
        for j in (i + 1)..dim {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

/// Determinant of the weighted Gram matrix sum_i w_i v_i v_i', computed
/// from the QR diagonal of the sqrt-weighted stacked matrix. Avoids the
/// squared conditioning of forming the Gram matrix first; returns 0 when
/// there are fewer vectors than dimensions.
pub fn weighted_gram_det(cols: &[DVector<f64>], weights: &[f64]) -> f64 {
    let dim = cols.first().map_or(0, |c| c.len());
    if cols.len() < dim {
        return 0.0;
    }
    let mut a = DMatrix::zeros(cols.len(), dim);
    for (i, (v, &w)) in cols.iter().zip(weights).enumerate() {
        let s = w.max(0.0).sqrt();
        for j in 0..dim {
            a[(i, j)] = s * v[j];
        }
    }
    let r = a.qr().unpack_r();
    (0..dim).map(|j| r[(j, j)] * r[(j, j)]).product()
}

/// Deterministic pairwise summation; order-independent of thread count
/// because callers always pass slices in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Golden-section maximization of `f` on [a, b] down to bracket width `tol`.
///
/// Assumes a single interior maximum in the bracket; returns (argmax, max).
pub fn golden_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Refine an interior local maximizer of a smooth function by iterated
/// three-point parabolic interpolation.
///
/// Comparison-based search (golden section) cannot place the argmax of a
/// smooth peak better than ~sqrt(eps) because the function is float-flat
/// there; the parabola vertex through samples at +-h is immune to that.
/// Returns `x0` unchanged when the samples are not concave or the stencil
/// leaves [lo, hi].
pub fn parabolic_refine_max(f: &dyn Fn(f64) -> f64, x0: f64, lo: f64, hi: f64) -> f64 {
    let mut x = x0;
    let mut h = 1e-4 * (hi - lo).max(f64::MIN_POSITIVE);
    for _ in 0..3 {
        if x - h < lo || x + h > hi {
            break;
        }
        let (fa, fx, fb) = (f(x - h), f(x), f(x + h));
        let denom = fa - 2.0 * fx + fb;
        if !(denom < 0.0) {
            break;
        }
        let step = 0.5 * h * (fa - fb) / denom;
        if !step.is_finite() || step.abs() > h {
            break;
        }
        x += step;
        h *= 0.1;
    }
    x.clamp(lo, hi)
}

/// Box-clamped Levenberg–Marquardt least squares.
///
/// Minimizes |r(x)|² with analytic Jacobian `j`, projecting every trial
/// point into [lower, upper] (pass empty slices for an unconstrained fit).
/// Returns the best point found and its sum of squares; callers that need
/// a global optimum run this from several starts.
pub fn levenberg_marquardt(
    r: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    j: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    start: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
    max_iter: usize,
) -> (DVector<f64>, f64) {
    let n = start.len();
    let clamp = |v: &DVector<f64>| -> DVector<f64> {
        if lower.is_empty() {
            v.clone()
        } else {
            DVector::from_iterator(
                n,
                v.iter()
                    .enumerate()
                    .map(|(i, &t)| t.clamp(lower[i], upper[i])),
            )
        }
    };
    let mut x = clamp(start);
    let mut res = r(&x);
    let mut ssq = res.norm_squared();
    if !ssq.is_finite() {
        return (x, f64::INFINITY);
    }
    let mut mu = -1.0; // scaled from the first J'J diagonal
    for _ in 0..max_iter {
        let jac = j(&x);
        let jtj = jac.transpose() * &jac;
        if mu < 0.0 {
            let dmax = (0..n).map(|i| jtj[(i, i)]).fold(0.0_f64, f64::max);
            mu = 1e-3 * dmax.max(1e-12);
        }
        let grad = jac.transpose() * &res;
        if grad.amax() < 1e-12 * (1.0 + ssq) {
            break;
        }
        let mut improved = false;
        for _ in 0..25 {
            let a = &jtj + DMatrix::identity(n, n) * mu;
            if let Some(d) = solve(&a, &grad) {
                let xn = clamp(&(&x - &d));
                let rn = r(&xn);
                let sn = rn.norm_squared();
                if sn.is_finite() && sn < ssq {
                    let step = (&xn - &x).norm();
                    x = xn;
                    res = rn;
                    ssq = sn;
                    mu = (mu / 3.0).max(1e-15);
                    improved = true;
                    if step < 1e-12 * (1.0 + x.norm()) {
                        return (x, ssq);
                    }
                    break;
                }
            }
            mu *= 3.0;
        }
        if !improved {
            break;
        }
    }
    (x, ssq)
}

/// Nelder–Mead simplex minimization with box clamping.
///
/// Standard parameters (reflect 1, expand 2, contract 1/2, shrink 1/2);
/// stops when the simplex collapses below 1e-12 in value spread and 1e-10
/// in diameter, or after `max_iter` reflections. Pass empty bounds slices
/// for an unconstrained search.
pub fn nelder_mead(
    f: &dyn Fn(&DVector<f64>) -> f64,
    start: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
    max_iter: usize,
) -> (DVector<f64>, f64) {
    let n = start.len();
    let clamp = |v: DVector<f64>| -> DVector<f64> {
        if lower.is_empty() {
            v
        } else {
            DVector::from_iterator(
                n,
                v.iter()
                    .enumerate()
                    .map(|(i, &t)| t.clamp(lower[i], upper[i])),
            )
        }
    };
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    let x0 = clamp(start.clone());
    simplex.push((x0.clone(), f(&x0)));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += 0.05 * (1.0 + x[i].abs());
        let x = clamp(x);
        let fx = f(&x);
        simplex.push((x, fx));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let diam = (&simplex[n].0 - &simplex[0].0).amax();
        if spread.abs() < 1e-12 * (1.0 + simplex[0].1.abs()) && diam < 1e-10 {
            break;
        }
        let centroid: DVector<f64> = simplex[..n]
            .iter()
            .fold(DVector::zeros(n), |acc, (x, _)| acc + x)
            / n as f64;
        let worst = simplex[n].clone();
        let refl = clamp(&centroid + (&centroid - &worst.0));
        let f_refl = f(&refl);
        if f_refl < simplex[0].1 {
            let exp = clamp(&centroid + (&centroid - &worst.0) * 2.0);
            let f_exp = f(&exp);
            simplex[n] = if f_exp < f_refl {
                (exp, f_exp)
            } else {
                (refl, f_refl)
            };
        } else if f_refl < simplex[n - 1].1 {
            simplex[n] = (refl, f_refl);
        } else {
            let contr = clamp(&centroid + (&worst.0 - &centroid) * 0.5);
            let f_contr = f(&contr);
            if f_contr < worst.1 {
                simplex[n] = (contr, f_contr);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x = clamp(&best + (&entry.0 - &best) * 0.5);
                    let fx = f(&x);
                    *entry = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Euclidean projection of v onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut out = Vec::with_capacity(n);
    for &vi in v {
        out.push((vi - theta).max(0.0));
    }
    out
}
