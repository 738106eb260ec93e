//! Design measures on a compact interval.
//!
//! A [`Design`] is a finitely supported probability measure: support points in
//! strictly increasing order with positive weights summing to one. An
//! [`ExactDesign`] allocates an integer number of runs to each point.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Compact design interval with an associated scan resolution.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DesignSpace {
    lower: f64,
    upper: f64,
    grid_points: usize,
}

impl DesignSpace {
    /// `grid_points` is the resolution used by grid scans; at least 101 so
    /// that residual maxima cannot slip between grid nodes unnoticed.
    pub fn new(lower: f64, upper: f64, grid_points: usize) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(Error::BadSpace {
                reason: format!("need finite lower < upper, got [{lower}, {upper}]"),
            });
        }
        if grid_points < 101 {
            return Err(Error::BadSpace {
                reason: format!("grid_points must be at least 101, got {grid_points}"),
            });
        }
        Ok(DesignSpace { lower, upper, grid_points })
    }

    /// The interval [-1, 1] at the default resolution.
    pub fn unit() -> Self {
        DesignSpace { lower: -1.0, upper: 1.0, grid_points: 1001 }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn span(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        // tolerate roundoff at the endpoints
        let slack = 1e-12 * self.span().max(1.0);
        x >= self.lower - slack && x <= self.upper + slack
    }

    /// Clamp a point onto the interval (used after endpoint roundoff).
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }

    /// Equally spaced scan grid with `n` nodes including both endpoints.
    pub fn grid_n(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        let h = self.span() / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { self.upper } else { self.lower + i as f64 * h })
            .collect()
    }

    /// Scan grid at the space's own resolution.
    pub fn grid(&self) -> Vec<f64> {
        self.grid_n(self.grid_points)
    }
}

/// Finitely supported probability measure in canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Design {
    /// Build a design in canonical form.
    ///
    /// Points are sorted (carrying weights along), zero-weight atoms dropped,
    /// duplicate points rejected, and the weights renormalized when their sum
    /// is within 1e-9 of one. Points outside `space` and negative weights are
    /// errors.
    pub fn new(points: &[f64], weights: &[f64], space: &DesignSpace) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::BadWeights {
                reason: format!("{} points but {} weights", points.len(), weights.len()),
            });
        }
        if points.is_empty() {
            return Err(Error::BadWeights { reason: "empty support".into() });
        }
        for &x in points {
            if !x.is_finite() || !space.contains(x) {
                return Err(Error::OutOfDomain {
                    point: x,
                    lower: space.lower(),
                    upper: space.upper(),
                });
            }
        }
        for &w in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::BadWeights { reason: format!("negative or non-finite weight {w}") });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::BadWeights {
                reason: format!("weights sum to {sum}, more than 1e-9 away from 1"),
            });
        }

        let mut pairs: Vec<(f64, f64)> = points
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&x, &w)| (space.clamp(x), w))
            .collect();
        if pairs.is_empty() {
            return Err(Error::BadWeights { reason: "all weights are zero".into() });
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for win in pairs.windows(2) {
            if win[0].0 == win[1].0 {
                return Err(Error::BadWeights {
                    reason: format!("duplicate support point {}", win[0].0),
                });
            }
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let points = pairs.iter().map(|p| p.0).collect();
        let weights = pairs.iter().map(|p| p.1 / total).collect();
        Ok(Design { points, weights })
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64, space: &DesignSpace) -> Result<Self> {
        Design::new(&[x], &[1.0], space)
    }

    /// Uniform weights on the given points.
    pub fn uniform(points: &[f64], space: &DesignSpace) -> Result<Self> {
        let w = vec![1.0 / points.len() as f64; points.len()];
        Design::new(points, &w, space)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// Round to an exact n-run design by largest-remainder apportionment.
    ///
    /// Counts are floor(n w_i) plus one extra run for the largest fractional
    /// remainders, ties broken toward the smaller point index. Zero-count
    /// atoms are dropped from the result. Every count is within one of n w_i
    /// and the counts sum to n exactly.
    pub fn round_to(&self, n: usize) -> Result<ExactDesign> {
        if n < self.len() {
            return Err(Error::TooFewRuns { n, support: self.len() });
        }
        let quotas: Vec<f64> = self.weights.iter().map(|w| w * n as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..self.len()).collect();
        // stable sort keeps smaller indices first among equal remainders
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra)
        });
        for &i in order.iter().take(n - assigned) {
            counts[i] += 1;
        }
        let (points, counts): (Vec<f64>, Vec<usize>) = self
            .points
            .iter()
            .zip(&counts)
            .filter(|(_, &c)| c > 0)
            .map(|(&x, &c)| (x, c))
            .unzip();
        Ok(ExactDesign { points, counts, n })
    }

    /// Merge support points closer than `tol` into weight-averaged atoms.
    pub fn merge_support(&self, tol: f64) -> Design {
        let mut points = vec![self.points[0]];
        let mut weights = vec![self.weights[0]];
        for (&x, &w) in self.points[1..].iter().zip(&self.weights[1..]) {
            let last = points.len() - 1;
            if x - points[last] < tol {
                let tot = weights[last] + w;
                points[last] = (points[last] * weights[last] + x * w) / tot;
                weights[last] = tot;
            } else {
                points.push(x);
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Design { points, weights }
    }

    /// Drop atoms with weight below `tol` and renormalize. Keeps the heaviest
    /// atom even if everything is below the threshold.
    pub fn drop_small(&self, tol: f64) -> Design {
        let mut pairs: Vec<(f64, f64)> =
            self.iter().filter(|&(_, w)| w >= tol).collect();
        if pairs.is_empty() {
            let (x, w) = self
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("design is never empty");
            pairs.push((x, w));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Design {
            points: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Weight at `x` (exact match), zero off the support.
    pub fn weight_at(&self, x: f64) -> f64 {
        match self.points.iter().position(|&p| p == x) {
            Some(i) => self.weights[i],
            None => 0.0,
        }
    }

    /// Largest pointwise discrepancy against another design, matching support
    /// points within `point_tol`. Unmatched atoms compare against weight zero,
    /// so a stray atom of mass 0.01 scores 0.01 rather than failing outright.
    pub fn weight_distance(&self, other: &Design, point_tol: f64) -> f64 {
        let mut worst: f64 = 0.0;
        let mut matched = vec![false; other.len()];
        for (x, w) in self.iter() {
            let mut best: Option<usize> = None;
            for (j, (y, _)) in other.iter().enumerate() {
                if (x - y).abs() <= point_tol && !matched[j] {
                    best = Some(j);
                    break;
                }
            }
            match best {
                Some(j) => {
                    matched[j] = true;
                    worst = worst.max((w - other.weights[j]).abs());
                }
                None => worst = worst.max(w),
            }
        }
        for (j, (_, w)) in other.iter().enumerate() {
            if !matched[j] {
                worst = worst.max(w);
            }
        }
        worst
    }
}

/// Exact design: integer run counts at each support point, summing to n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDesign {
    points: Vec<f64>,
    counts: Vec<usize>,
    n: usize,
}

impl ExactDesign {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support_size(&self) -> usize {
        self.points.len()
    }

    /// The n observation locations, repeated per count, in support order.
    pub fn expand(&self) -> Vec<f64> {
        let mut xs = Vec::with_capacity(self.n);
        for (&x, &c) in self.points.iter().zip(&self.counts) {
            xs.extend(std::iter::repeat(x).take(c));
        }
        xs
    }

    /// The probability measure with weights counts/n.
    pub fn as_design(&self, space: &DesignSpace) -> Result<Design> {
        let w: Vec<f64> = self.counts.iter().map(|&c| c as f64 / self.n as f64).collect();
        Design::new(&self.points, &w, space)
    }
}
