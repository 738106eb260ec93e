//! Discrimination criteria.
//!
//! The T-value is the design-weighted squared distance from a fixed mean to
//! the closest member of the rival family ([`t_value`]). For linear rivals
//! it equals a Gram determinant ratio ([`gram_ratio`]) and, for nested
//! pairs, the Schur-complement noncentrality ([`schur_noncentrality`]) —
//! the same quantity through three routes, which the tests exploit.
//! [`kl_value`] generalizes the T-value to heteroscedastic Gaussian
//! observations; [`ds_value`] is the determinant-ratio criterion for
//! estimating the tested coordinates of a nested pair.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, pairwise_sum, weighted_gram};
use crate::models::{Family, FixedMean, GaussianObsModel, NestedPair};
use crate::{Design, DesignSpace, Error, Result};

/// Determinants below this magnitude count as singular in ratio criteria.
pub const SINGULAR_DET_TOL: f64 = 1e-14;

/// Value of a discrimination criterion together with its inner minimizer.
#[derive(Clone, Debug)]
pub struct CriterionValue {
    /// Criterion value: sum_i w_i residual_i^2.
    pub value: f64,
    /// Rival parameter attaining the inner minimum.
    pub minimizer: DVector<f64>,
    /// Residuals at the support points (precision-scaled for KL problems,
    /// so that the weighted sum of their squares reproduces `value`).
    pub residual_at_support: Vec<f64>,
    /// True when the inner least-squares system was rank deficient and the
    /// minimum-norm solution was returned; the value itself is unaffected.
    pub singular_inner: bool,
}

/// Information matrices of a nested pair under a design.
#[derive(Clone, Debug)]
pub struct InfoMatrices {
    /// Full-model matrix, tested coordinates ordered last.
    pub m_full: DMatrix<f64>,
    /// Leading nuisance block.
    pub m_reduced: DMatrix<f64>,
    /// Nuisance gradient extended by the deviation function.
    pub m_extended: DMatrix<f64>,
    /// Schur complement of the nuisance block in the full matrix.
    pub schur: DMatrix<f64>,
}

fn check_in_space(design: &Design, space: &DesignSpace) -> Result<()> {
    for &x in design.points() {
        if !space.contains(x) {
            return Err(Error::OutOfDomain {
                point: x,
                lower: space.lower(),
                upper: space.upper(),
            });
        }
    }
    Ok(())
}

/// Weighted least squares: minimize sum w_i (y_i - theta' f_i)^2 by SVD on
/// the sqrt-weighted system. Returns the minimum-norm solution and a rank
/// deficiency flag.
fn weighted_ls(rows: &[DVector<f64>], ys: &[f64], ws: &[f64]) -> (DVector<f64>, bool) {
    let dim = rows.first().map_or(0, |r| r.len());
    let mut a = DMatrix::zeros(rows.len(), dim);
    let mut b = DVector::zeros(rows.len());
    for (i, (row, (&y, &w))) in rows.iter().zip(ys.iter().zip(ws)).enumerate() {
        let s = w.max(0.0).sqrt();
        for j in 0..dim {
            a[(i, j)] = s * row[j];
        }
        b[i] = s * y;
    }
    linalg::solve_min_norm(&a, &b)
}

/// Inner minimization shared by the T and KL criteria: weights are
/// w_i * lambda_i and residuals are reported on the sqrt(lambda)-scaled
/// mean scale.
fn inner_minimum(
    design: &Design,
    eta: &dyn Fn(f64) -> f64,
    lambda: &dyn Fn(f64) -> f64,
    rival: &Family,
) -> Result<CriterionValue> {
    let pts = design.points();
    let ws = design.weights();
    let lam: Vec<f64> = pts.iter().map(|&x| lambda(x)).collect();
    if let Some((i, &l)) = lam.iter().enumerate().find(|(_, &l)| l < 0.0) {
        return Err(Error::BadSpace {
            reason: format!("negative precision {l} at support point {}", pts[i]),
        });
    }
    let etas: Vec<f64> = pts.iter().map(|&x| eta(x)).collect();
    let wl: Vec<f64> = ws.iter().zip(&lam).map(|(w, l)| w * l).collect();
    let (theta, singular) = fit_weighted(pts, &etas, &wl, rival, &[], true);
    let resid: Vec<f64> = pts
        .iter()
        .zip(etas.iter().zip(&lam))
        .map(|(&x, (&e, &l))| l.sqrt() * (e - rival.eval(&theta, x).expect("dims fixed")))
        .collect();
    let terms: Vec<f64> = resid.iter().zip(ws).map(|(r, &w)| w * r * r).collect();
    Ok(CriterionValue {
        value: pairwise_sum(&terms),
        minimizer: theta,
        residual_at_support: resid,
        singular_inner: singular,
    })
}

/// Weighted rival fit shared with the solvers: minimizes
/// sum_i wl_i (eta_i - rival(theta, x_i))^2 over theta, where `wl` is the
/// combined weight-times-precision vector. Exact least squares for linear
/// rivals. For exponential families `warm` seeds local fits and `thorough`
/// adds low-discrepancy box starts; the iterative loops of an exchange
/// solver pass the previous minimizer and skip the multi-start.
pub(crate) fn fit_weighted(
    pts: &[f64],
    etas: &[f64],
    wl: &[f64],
    rival: &Family,
    warm: &[DVector<f64>],
    thorough: bool,
) -> (DVector<f64>, bool) {
    match rival {
        Family::Linear(basis) => {
            let rows: Vec<DVector<f64>> = pts.iter().map(|&x| basis.eval(x)).collect();
            weighted_ls(&rows, etas, wl)
        }
        Family::ExpSum { .. } => {
            let bx = rival.bounds().expect("exp family has bounds").clone();
            let scale: Vec<f64> = wl.iter().map(|w| w.max(0.0).sqrt()).collect();
            let resid = |t: &DVector<f64>| {
                DVector::from_iterator(
                    pts.len(),
                    pts.iter().zip(etas.iter().zip(&scale)).map(|(&x, (&e, &s))| {
                        s * (rival.eval(t, x).expect("dims fixed") - e)
                    }),
                )
            };
            let jac = |t: &DVector<f64>| {
                let mut m = DMatrix::zeros(pts.len(), rival.dim());
                for (i, (&x, &s)) in pts.iter().zip(&scale).enumerate() {
                    let g = rival.gradient(t, x).expect("dims fixed");
                    for j in 0..rival.dim() {
                        m[(i, j)] = s * g[j];
                    }
                }
                m
            };
            let mut starts: Vec<DVector<f64>> = warm.to_vec();
            if thorough || starts.is_empty() {
                starts.extend(bx.halton_points(8));
                starts.push(rival.zero_theta());
            }
            let mut best: Option<(DVector<f64>, f64)> = None;
            for s in &starts {
                let (t, ssq) =
                    linalg::levenberg_marquardt(&resid, &jac, s, bx.lower(), bx.upper(), 200);
                if best.as_ref().map_or(true, |b| ssq < b.1) {
                    best = Some((t, ssq));
                }
            }
            (best.expect("nonempty starts").0, false)
        }
    }
}

/// T-criterion value of a design: the inner minimum over the rival family
/// of the design-weighted squared deviation from `eta`. Exact weighted
/// least squares for linear rivals; multi-start box-constrained fits for
/// exponential families.
pub fn t_value(
    design: &Design,
    eta: &FixedMean,
    rival: &Family,
    space: &DesignSpace,
) -> Result<CriterionValue> {
    check_in_space(design, space)?;
    inner_minimum(design, &|x| eta.eval(x), &|_| 1.0, rival)
}

/// Same criterion through the Gram identity: the ratio of the extended
/// determinant (basis plus `eta`) to the basis determinant. Errors with
/// `SingularReduced` when the basis matrix is singular; returns 0 when only
/// the extended matrix is.
pub fn gram_ratio(design: &Design, eta: &FixedMean, basis: &crate::models::Basis) -> Result<f64> {
    let pts = design.points();
    let ws = design.weights();
    let cols: Vec<DVector<f64>> = pts.iter().map(|&x| basis.eval(x)).collect();
    let det_m = linalg::weighted_gram_det(&cols, ws);
    if det_m.abs() < SINGULAR_DET_TOL {
        return Err(Error::SingularReduced { det: det_m });
    }
    let ext: Vec<DVector<f64>> = pts
        .iter()
        .map(|&x| {
            let f = basis.eval(x);
            let mut v = DVector::zeros(f.len() + 1);
            v.rows_mut(0, f.len()).copy_from(&f);
            v[f.len()] = eta.eval(x);
            v
        })
        .collect();
    let det_ext = linalg::weighted_gram_det(&ext, ws);
    Ok((det_ext / det_m).max(0.0))
}

/// Information matrices of the pair under the design; the Schur complement
/// requires a nonsingular nuisance block.
pub fn info_matrices(design: &Design, pair: &NestedPair) -> Result<InfoMatrices> {
    let pts = design.points();
    let ws = design.weights();
    let m2 = pair.m2();
    let s = pair.s();
    let grads: Vec<DVector<f64>> = pts.iter().map(|&x| pair.full_gradient(x)).collect();
    let m_full = weighted_gram(&grads, ws);
    let m_reduced = m_full.view((0, 0), (m2, m2)).into_owned();
    let ext: Vec<DVector<f64>> = pts
        .iter()
        .zip(&grads)
        .map(|(&x, g)| {
            let mut v = DVector::zeros(m2 + 1);
            v.rows_mut(0, m2).copy_from(&g.rows(0, m2));
            v[m2] = pair.gap(x);
            v
        })
        .collect();
    let m_extended = weighted_gram(&ext, ws);
    let det_red = linalg::det(&m_reduced);
    if det_red.abs() < SINGULAR_DET_TOL {
        return Err(Error::SingularReduced { det: det_red });
    }
    let b = m_full.view((0, m2), (m2, s)).into_owned();
    let c = m_full.view((m2, m2), (s, s)).into_owned();
    let x = m_reduced
        .clone()
        .lu()
        .solve(&b)
        .ok_or(Error::SingularReduced { det: det_red })?;
    let mut schur = c - b.transpose() * x;
    // enforce exact symmetry lost to rounding
    schur = (schur.clone() + schur.transpose()) * 0.5;
    Ok(InfoMatrices {
        m_full,
        m_reduced,
        m_extended,
        schur,
    })
}

/// Determinant-ratio criterion |M_full| / |M_nuisance| for the tested
/// coordinates of a nested pair.
pub fn ds_value(design: &Design, pair: &NestedPair) -> Result<f64> {
    let pts = design.points();
    let ws = design.weights();
    let m2 = pair.m2();
    let grads: Vec<DVector<f64>> = pts.iter().map(|&x| pair.full_gradient(x)).collect();
    let m_full = weighted_gram(&grads, ws);
    let m_reduced = m_full.view((0, 0), (m2, m2)).into_owned();
    let det_red = linalg::det(&m_reduced);
    if det_red.abs() < SINGULAR_DET_TOL {
        return Err(Error::SingularReduced { det: det_red });
    }
    Ok((linalg::det(&m_full) / det_red).max(0.0))
}

/// Noncentrality quadratic form: theta0' (Schur complement) theta0 for a
/// nested linear pair. Equals the T-value of the implied discrimination
/// problem.
pub fn schur_noncentrality(design: &Design, pair: &NestedPair) -> Result<f64> {
    let theta0 = pair.theta0().ok_or_else(|| Error::BadModel {
        reason: "noncentrality needs a linear pair with extension coefficients".into(),
    })?;
    let info = info_matrices(design, pair)?;
    Ok((theta0.transpose() * &info.schur * theta0)[(0, 0)].max(0.0))
}

/// Pointwise Kullback-Leibler distance between two Gaussian observation
/// models sharing the precision function: lambda(x) (eta(x) - rival(theta, x))^2.
pub fn kl_distance_gaussian(
    obs_true: &GaussianObsModel,
    rival: &Family,
    theta: &DVector<f64>,
    x: f64,
) -> Result<f64> {
    let lam = obs_true.precision().at(x).max(0.0);
    let r = obs_true.mean().eval(x) - rival.eval(theta, x)?;
    Ok(lam * r * r)
}

/// KL-criterion value: inner minimum over the rival family of the
/// design-weighted KL distance. Reduces to [`t_value`] under constant
/// precision 1.
pub fn kl_value(
    design: &Design,
    obs_true: &GaussianObsModel,
    rival: &Family,
    space: &DesignSpace,
) -> Result<CriterionValue> {
    check_in_space(design, space)?;
    let mean = obs_true.mean().clone();
    let prec = obs_true.precision().clone();
    inner_minimum(design, &|x| mean.eval(x), &|x| prec.at(x), rival)
}
