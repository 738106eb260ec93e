//! Mean-function families and observation models.
//!
//! A [`FixedMean`] is a fully determined function of x (the "true" response
//! in a discrimination problem). A [`Family`] is a parametric class that
//! rivals it: either the span of a [`Basis`] or a sum of exponential terms.
//! [`NestedPair`] records which coordinates of a full model vanish under the
//! submodel, and [`GaussianObsModel`] attaches a precision function for
//! heteroscedastic problems.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{DesignSpace, Error, Result};

/// Minimum separation between exponential rates.
pub const MIN_RATE_GAP: f64 = 1e-8;

/// Shared scalar function of one variable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Ordered list of scalar basis functions.
#[derive(Clone)]
pub struct Basis {
    labels: Vec<String>,
    funcs: Vec<ScalarFn>,
}

impl Basis {
    /// Monomials 1, x, ..., x^(m-1).
    pub fn monomials(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::BadModel {
                reason: "basis needs at least one function".into(),
            });
        }
        let labels = (0..m)
            .map(|i| match i {
                0 => "1".to_string(),
                1 => "x".to_string(),
                d => format!("x^{d}"),
            })
            .collect();
        let funcs = (0..m)
            .map(|i| Arc::new(move |x: f64| x.powi(i as i32)) as ScalarFn)
            .collect();
        Ok(Self { labels, funcs })
    }

    /// Exponentials e^(-b x) for each listed rate.
    pub fn exponentials(rates: &[f64]) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::BadModel {
                reason: "basis needs at least one function".into(),
            });
        }
        let labels = rates.iter().map(|b| format!("exp(-{b}*x)")).collect();
        let funcs = rates
            .iter()
            .map(|&b| Arc::new(move |x: f64| (-b * x).exp()) as ScalarFn)
            .collect();
        Ok(Self { labels, funcs })
    }

    /// Arbitrary functions with display labels.
    pub fn custom(labels: Vec<String>, funcs: Vec<ScalarFn>) -> Result<Self> {
        if funcs.is_empty() || labels.len() != funcs.len() {
            return Err(Error::BadModel {
                reason: "custom basis needs one label per function".into(),
            });
        }
        Ok(Self { labels, funcs })
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub(crate) fn funcs(&self) -> &[ScalarFn] {
        &self.funcs
    }

    /// Basis vector (f_1(x), ..., f_m(x)).
    pub fn eval(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(self.funcs.len(), self.funcs.iter().map(|f| f(x)))
    }

    /// First m functions as a sub-basis.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(Error::BadModel {
                reason: format!("prefix length {m} out of range 1..={}", self.len()),
            });
        }
        Ok(Self {
            labels: self.labels[..m].to_vec(),
            funcs: self.funcs[..m].to_vec(),
        })
    }
}

impl fmt::Debug for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Basis").field(&self.labels).finish()
    }
}

/// Linear span of a basis, optionally pinned at one coefficient vector.
#[derive(Clone, Debug)]
pub struct LinearModel {
    basis: Basis,
    theta: Option<DVector<f64>>,
}

impl LinearModel {
    pub fn new(basis: Basis) -> Self {
        Self { basis, theta: None }
    }

    pub fn with_theta(basis: Basis, theta: DVector<f64>) -> Result<Self> {
        if theta.len() != basis.len() {
            return Err(Error::BadTheta {
                expected: basis.len(),
                got: theta.len(),
            });
        }
        Ok(Self {
            basis,
            theta: Some(theta),
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn theta(&self) -> Option<&DVector<f64>> {
        self.theta.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Sum of exponential terms a_j * e^(-b_j x) with fixed coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpSumModel {
    terms: Vec<(f64, f64)>,
}

impl ExpSumModel {
    /// Terms are (amplitude, rate) pairs; rates must be pairwise distinct.
    pub fn new(terms: Vec<(f64, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::BadModel {
                reason: "exponential sum needs at least one term".into(),
            });
        }
        for (i, &(a, b)) in terms.iter().enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::BadModel {
                    reason: format!("term {i} is not finite"),
                });
            }
            for &(_, b2) in &terms[..i] {
                if (b - b2).abs() < MIN_RATE_GAP {
                    return Err(Error::BadModel {
                        reason: format!("rates {b2} and {b} closer than {MIN_RATE_GAP}"),
                    });
                }
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn k(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(a, b)| a * (-b * x).exp()).sum()
    }

    /// Parameter vector (a_1, b_1, ..., a_k, b_k).
    pub fn theta(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.terms.len(),
            self.terms.iter().flat_map(|&(a, b)| [a, b]),
        )
    }
}

/// Fully determined mean function with no free parameters.
#[derive(Clone)]
pub enum FixedMean {
    /// Coefficients c_0 + c_1 x + c_2 x^2 + ... (empty list is the zero function).
    Polynomial(Vec<f64>),
    Linear(LinearModel),
    ExpSum(ExpSumModel),
    Custom { label: String, f: ScalarFn },
}

impl FixedMean {
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::Polynomial(coeffs)
    }

    pub fn zero() -> Self {
        Self::Polynomial(Vec::new())
    }

    /// Linear model with its coefficient vector pinned.
    pub fn linear(model: LinearModel) -> Result<Self> {
        if model.theta().is_none() {
            return Err(Error::BadModel {
                reason: "fixed mean from a linear model needs theta".into(),
            });
        }
        Ok(Self::Linear(model))
    }

    pub fn exp_sum(model: ExpSumModel) -> Self {
        Self::ExpSum(model)
    }

    pub fn custom(label: impl Into<String>, f: ScalarFn) -> Self {
        Self::Custom {
            label: label.into(),
            f,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            Self::Linear(m) => m.theta().expect("pinned theta").dot(&m.basis().eval(x)),
            Self::ExpSum(m) => m.eval(x),
            Self::Custom { f, .. } => f(x),
        }
    }
}

impl fmt::Debug for FixedMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Polynomial(c) => f.debug_tuple("Polynomial").field(c).finish(),
            Self::Linear(m) => f.debug_tuple("Linear").field(m).finish(),
            Self::ExpSum(m) => f.debug_tuple("ExpSum").field(m).finish(),
            Self::Custom { label, .. } => f.debug_tuple("Custom").field(label).finish(),
        }
    }
}

/// Box constraints for a parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ThetaBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::BadModel {
                reason: "parameter box needs matching nonempty bounds".into(),
            });
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::BadModel {
                    reason: format!("bad bounds at coordinate {i}: [{lo}, {hi}]"),
                });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&t, (&lo, &hi))| t >= lo && t <= hi)
    }

    pub fn clamp(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            theta.len(),
            theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(&t, (&lo, &hi))| t.clamp(lo, hi)),
        )
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)),
        )
    }

    /// Deterministic low-discrepancy points inside the box (Halton sequence,
    /// one prime base per coordinate). Reproducible without a seed.
    pub fn halton_points(&self, n: usize) -> Vec<DVector<f64>> {
        const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
        assert!(self.dim() <= PRIMES.len(), "box dimension above 12");
        (1..=n)
            .map(|i| {
                DVector::from_iterator(
                    self.dim(),
                    (0..self.dim()).map(|d| {
                        let u = radical_inverse(i, PRIMES[d]);
                        self.lower[d] + u * (self.upper[d] - self.lower[d])
                    }),
                )
            })
            .collect()
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Parametric rival family: evaluation and analytic parameter gradient.
#[derive(Clone, Debug)]
pub enum Family {
    /// theta' f(x) over the given basis.
    Linear(Basis),
    /// sum of `terms` exponential terms, theta = (a_1, b_1, ..., a_k, b_k).
    ExpSum { terms: usize, bounds: ThetaBox },
}

impl Family {
    pub fn linear(basis: Basis) -> Self {
        Self::Linear(basis)
    }

    /// Exponential-sum family with the default box: amplitudes in
    /// [-100, 100] and rates in [-10, 10].
    pub fn exp_sum(terms: usize) -> Result<Self> {
        if terms == 0 {
            return Err(Error::BadModel {
                reason: "family needs at least one exponential term".into(),
            });
        }
        let mut lower = Vec::with_capacity(2 * terms);
        let mut upper = Vec::with_capacity(2 * terms);
        for _ in 0..terms {
            lower.extend([-100.0, -10.0]);
            upper.extend([100.0, 10.0]);
        }
        Ok(Self::ExpSum {
            terms,
            bounds: ThetaBox::new(lower, upper)?,
        })
    }

    pub fn exp_sum_with_bounds(terms: usize, bounds: ThetaBox) -> Result<Self> {
        if terms == 0 || bounds.dim() != 2 * terms {
            return Err(Error::BadModel {
                reason: "exponential family bounds must have one (lo, hi) pair per coordinate".into(),
            });
        }
        Ok(Self::ExpSum { terms, bounds })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Linear(b) => b.len(),
            Self::ExpSum { terms, .. } => 2 * terms,
        }
    }

    pub fn bounds(&self) -> Option<&ThetaBox> {
        match self {
            Self::Linear(_) => None,
            Self::ExpSum { bounds, .. } => Some(bounds),
        }
    }

    /// Parameter vector at which the family evaluates identically to zero.
    pub fn zero_theta(&self) -> DVector<f64> {
        DVector::zeros(self.dim())
    }

    fn check_theta(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::BadTheta {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, theta: &DVector<f64>, x: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self {
            Self::Linear(b) => theta.dot(&b.eval(x)),
            Self::ExpSum { terms, .. } => (0..*terms)
                .map(|j| theta[2 * j] * (-theta[2 * j + 1] * x).exp())
                .sum(),
        })
    }

    /// Gradient with respect to theta. For the exponential family each term
    /// contributes (e^(-b x), -a x e^(-b x)).
    pub fn gradient(&self, theta: &DVector<f64>, x: f64) -> Result<DVector<f64>> {
        self.check_theta(theta)?;
        Ok(match self {
            Self::Linear(b) => b.eval(x),
            Self::ExpSum { terms, .. } => {
                let mut g = DVector::zeros(2 * terms);
                for j in 0..*terms {
                    let (a, b) = (theta[2 * j], theta[2 * j + 1]);
                    let e = (-b * x).exp();
                    g[2 * j] = e;
                    g[2 * j + 1] = -a * x * e;
                }
                g
            }
        })
    }
}

/// Mean of the family at a parameter vector.
pub fn eval_mean(family: &Family, theta: &DVector<f64>, x: f64) -> Result<f64> {
    family.eval(theta, x)
}

/// Analytic parameter gradient of the family mean.
pub fn eval_gradient(family: &Family, theta: &DVector<f64>, x: f64) -> Result<DVector<f64>> {
    family.gradient(theta, x)
}

/// Full model together with the coordinates that vanish under the submodel.
///
/// The tested coordinates always sort last in the gradient returned by
/// [`NestedPair::full_gradient`], so information-matrix blocks partition as
/// (nuisance | tested).
#[derive(Clone, Debug)]
pub enum NestedPair {
    /// Full basis (f_1..f_m2, g_1..g_m0) vs its length-m2 prefix; theta0
    /// holds the m0 extension coefficients.
    Linear {
        full: Basis,
        m2: usize,
        theta0: DVector<f64>,
    },
    /// Nonlinear family linearized at `theta`; `tested` lists the
    /// coordinates set to zero under the submodel.
    Local {
        family: Family,
        theta: DVector<f64>,
        tested: Vec<usize>,
    },
}

impl NestedPair {
    pub fn linear(full: Basis, m2: usize, theta0: DVector<f64>) -> Result<Self> {
        let m1 = full.len();
        if m2 == 0 || m2 >= m1 {
            return Err(Error::BadModel {
                reason: format!("submodel size {m2} must lie strictly between 0 and {m1}"),
            });
        }
        if theta0.len() != m1 - m2 {
            return Err(Error::BadTheta {
                expected: m1 - m2,
                got: theta0.len(),
            });
        }
        Ok(Self::Linear { full, m2, theta0 })
    }

    pub fn local(family: Family, theta: DVector<f64>, tested: Vec<usize>) -> Result<Self> {
        let m1 = family.dim();
        if theta.len() != m1 {
            return Err(Error::BadTheta {
                expected: m1,
                got: theta.len(),
            });
        }
        if tested.is_empty() || tested.len() >= m1 {
            return Err(Error::BadModel {
                reason: "tested coordinates must be a nonempty strict subset".into(),
            });
        }
        let mut seen = vec![false; m1];
        for &i in &tested {
            if i >= m1 || seen[i] {
                return Err(Error::BadModel {
                    reason: format!("tested coordinate {i} out of range or repeated"),
                });
            }
            seen[i] = true;
        }
        Ok(Self::Local {
            family,
            theta,
            tested,
        })
    }

    /// Full model dimension m1.
    pub fn m1(&self) -> usize {
        match self {
            Self::Linear { full, .. } => full.len(),
            Self::Local { family, .. } => family.dim(),
        }
    }

    /// Number of tested coordinates (m0, or s in the determinant ratio).
    pub fn s(&self) -> usize {
        match self {
            Self::Linear { full, m2, .. } => full.len() - m2,
            Self::Local { tested, .. } => tested.len(),
        }
    }

    /// Nuisance dimension m2 = m1 - s.
    pub fn m2(&self) -> usize {
        self.m1() - self.s()
    }

    /// Extension coefficients for the linear case.
    pub fn theta0(&self) -> Option<&DVector<f64>> {
        match self {
            Self::Linear { theta0, .. } => Some(theta0),
            Self::Local { .. } => None,
        }
    }

    /// Sub-basis spanned by the submodel (linear case).
    pub fn reduced_basis(&self) -> Option<Basis> {
        match self {
            Self::Linear { full, m2, .. } => Some(full.prefix(*m2).expect("checked at build")),
            Self::Local { .. } => None,
        }
    }

    /// Deviation of the full model from the submodel along the tested
    /// coordinates: theta0' g(x) for the linear case, and the matching
    /// linearized form sum_tested theta_i grad_i(x) for the local case.
    pub fn gap(&self, x: f64) -> f64 {
        match self {
            Self::Linear { full, m2, theta0 } => {
                let g = full.eval(x);
                theta0
                    .iter()
                    .enumerate()
                    .map(|(j, t0)| t0 * g[m2 + j])
                    .sum()
            }
            Self::Local {
                family,
                theta,
                tested,
            } => {
                let g = family.gradient(theta, x).expect("checked at build");
                tested.iter().map(|&i| theta[i] * g[i]).sum()
            }
        }
    }

    /// Full-model gradient at x, reordered so tested coordinates come last.
    pub fn full_gradient(&self, x: f64) -> DVector<f64> {
        match self {
            Self::Linear { full, .. } => full.eval(x),
            Self::Local {
                family,
                theta,
                tested,
            } => {
                let g = family.gradient(theta, x).expect("checked at build");
                let m1 = g.len();
                let mut order: Vec<usize> = (0..m1).filter(|i| !tested.contains(i)).collect();
                order.extend(tested.iter().copied());
                DVector::from_iterator(m1, order.into_iter().map(|i| g[i]))
            }
        }
    }
}

/// Precision (inverse variance) function of the observation noise.
#[derive(Clone, Debug, PartialEq)]
pub enum Precision {
    /// lambda(x) = c, i.e. constant variance 1/c.
    Constant(f64),
    /// lambda(x) = c (1 - x^2); positive only on (-1, 1).
    OneMinusX2 { scale: f64 },
}

impl Precision {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::BadModel {
                reason: format!("precision must be positive, got {c}"),
            });
        }
        Ok(Self::Constant(c))
    }

    pub fn one_minus_x2(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::BadModel {
                reason: format!("precision scale must be positive, got {scale}"),
            });
        }
        Ok(Self::OneMinusX2 { scale })
    }

    pub fn at(&self, x: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::OneMinusX2 { scale } => scale * (1.0 - x * x),
        }
    }

    /// Noise variance 1/lambda(x).
    pub fn variance(&self, x: f64) -> f64 {
        1.0 / self.at(x)
    }
}

/// Gaussian response with a fixed mean and a known precision function.
#[derive(Clone, Debug)]
pub struct GaussianObsModel {
    mean: FixedMean,
    precision: Precision,
}

impl GaussianObsModel {
    pub fn new(mean: FixedMean, precision: Precision) -> Self {
        Self { mean, precision }
    }

    pub fn mean(&self) -> &FixedMean {
        &self.mean
    }

    pub fn precision(&self) -> &Precision {
        &self.precision
    }
}

/// Test whether the basis behaves like a Chebyshev system on the space:
/// the determinant of (f_i(x_j)) must keep one strict sign over `trials`
/// random increasing point sets. A `false` answer is conclusive; `true` is
/// sampling evidence. Deterministic (internal fixed seed).
pub fn check_chebyshev_system(basis: &Basis, space: &DesignSpace, trials: usize) -> bool {
    let m = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4348_4542);
    let mut sign = 0i8;
    let mut seen = 0usize;
    for _ in 0..trials.max(1) {
        let mut pts: Vec<f64> = (0..m)
            .map(|_| space.lower() + rng.gen::<f64>() * space.span())
            .collect();
        pts.sort_by(f64::total_cmp);
        if pts.windows(2).any(|w| w[1] - w[0] < 1e-9 * space.span()) {
            continue;
        }
        let mat = DMatrix::from_fn(m, m, |i, j| basis.eval(pts[j])[i]);
        // Hadamard bound sets the scale for calling a determinant zero
        let scale: f64 = (0..m).map(|j| mat.column(j).norm()).product();
        let d = mat.determinant();
        if !d.is_finite() {
            return false;
        }
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
        let s = if d > tol {
            1
        } else if d < -tol {
            -1
        } else {
            return false;
        };
        if sign == 0 {
            sign = s;
        } else if sign != s {
            return false;
        }
        seen += 1;
    }
    seen > 0
}
