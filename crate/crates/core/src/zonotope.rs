//! Zonotopes in G-representation and the set operations the reachability
//! code is built on.
//!
//! A zonotope `Z = (c | G)` is the set `{ c + Σ_i β_i g_i | β_i ∈ [-1, 1] }`.
//! Generators are stored densely, one `Vec<f64>` of length `D` per generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linprog::{self, LinearProgram, LpStatus};

/// Floor applied to zero-width dimensions inside [`Zonotope::size_measure`].
pub const SIZE_FLOOR: f64 = 1e-12;

/// Default residual tolerance for [`Zonotope::contains_point`].
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zonotope {
    center: Vec<f64>,
    generators: Vec<Vec<f64>>,
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalHull {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl IntervalHull {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| u - l)
            .collect()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
    }

    /// Clips the box to the nonnegative orthant.
    pub fn positive_part(&self) -> IntervalHull {
        IntervalHull {
            lower: self.lower.iter().map(|l| l.max(0.0)).collect(),
            upper: self.upper.iter().map(|u| u.max(0.0)).collect(),
        }
    }

    /// The box as an axis-aligned zonotope with one generator per dimension.
    pub fn to_zonotope(&self) -> Zonotope {
        let dim = self.dim();
        let half: Vec<f64> = self.widths().into_iter().map(|w| 0.5 * w).collect();
        let center = self.lower.iter().zip(&half).map(|(l, h)| l + h).collect();
        let generators = (0..dim)
            .map(|d| {
                let mut g = vec![0.0; dim];
                g[d] = half[d];
                g
            })
            .collect();
        Zonotope { center, generators }
    }
}

impl Zonotope {
    /// Builds a zonotope, checking that every generator matches the center's
    /// dimension and that all entries are finite.
    pub fn new(center: Vec<f64>, generators: Vec<Vec<f64>>) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Empty("zonotope center"));
        }
        for g in &generators {
            if g.len() != center.len() {
                return Err(Error::DimensionMismatch {
                    context: "zonotope generator",
                    expected: center.len(),
                    found: g.len(),
                });
            }
        }
        if center
            .iter()
            .chain(generators.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("zonotope"));
        }
        Ok(Self { center, generators })
    }

    /// Zonotope without generators.
    pub fn point(center: Vec<f64>) -> Result<Self> {
        Self::new(center, Vec::new())
    }

    /// Axis-aligned box `(center | diag(radii))`. Zero radii produce zero generators.
    pub fn axis_box(center: Vec<f64>, radii: &[f64]) -> Result<Self> {
        if radii.len() != center.len() {
            return Err(Error::DimensionMismatch {
                context: "box radii",
                expected: center.len(),
                found: radii.len(),
            });
        }
        let dim = center.len();
        let generators = radii
            .iter()
            .enumerate()
            .map(|(d, r)| {
                let mut g = vec![0.0; dim];
                g[d] = *r;
                g
            })
            .collect();
        Self::new(center, generators)
    }

    pub(crate) fn from_parts_unchecked(center: Vec<f64>, generators: Vec<Vec<f64>>) -> Self {
        debug_assert!(generators.iter().all(|g| g.len() == center.len()));
        Self { center, generators }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<Vec<f64>>) {
        (self.center, self.generators)
    }

    /// The point `c + Σ β_i g_i`.
    ///
    /// Panics if `beta` does not have one entry per generator.
    pub fn eval(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(
            beta.len(),
            self.generators.len(),
            "one coefficient per generator"
        );
        let mut p = self.center.clone();
        for (b, g) in beta.iter().zip(&self.generators) {
            for (pd, gd) in p.iter_mut().zip(g) {
                *pd += b * gd;
            }
        }
        p
    }

    /// `δg = Σ_i |g_i|`, the half-widths of the interval hull.
    pub fn generator_abs_sum(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for g in &self.generators {
            for (a, gd) in acc.iter_mut().zip(g) {
                *a += gd.abs();
            }
        }
        acc
    }

    pub fn interval_hull(&self) -> IntervalHull {
        let radius = self.generator_abs_sum();
        IntervalHull {
            lower: self.center.iter().zip(&radius).map(|(c, r)| c - r).collect(),
            upper: self.center.iter().zip(&radius).map(|(c, r)| c + r).collect(),
        }
    }

    /// Exact image under `x ↦ W x + b`, with `W` given row-major.
    pub fn linear_transform(&self, weights: &[Vec<f64>], bias: &[f64]) -> Result<Zonotope> {
        if weights.len() != bias.len() {
            return Err(Error::DimensionMismatch {
                context: "bias length",
                expected: weights.len(),
                found: bias.len(),
            });
        }
        for row in weights {
            if row.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    context: "weight columns",
                    expected: self.dim(),
                    found: row.len(),
                });
            }
        }
        let apply = |v: &[f64]| -> Vec<f64> { weights.iter().map(|row| dot(row, v)).collect() };
        let center = apply(&self.center)
            .into_iter()
            .zip(bias)
            .map(|(x, b)| x + b)
            .collect();
        let generators = self.generators.iter().map(|g| apply(g)).collect();
        Ok(Zonotope { center, generators })
    }

    /// Zeroes the center and every generator on the given dimensions.
    pub fn project(&self, dims: &[usize]) -> Result<Zonotope> {
        let dim = self.dim();
        if let Some(&bad) = dims.iter().find(|&&d| d >= dim) {
            return Err(Error::IndexOutOfRange { index: bad, dim });
        }
        Ok(self.project_mask(&dims_to_mask(dims, dim)))
    }

    pub(crate) fn project_mask(&self, mask: &[bool]) -> Zonotope {
        let zero = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(mask)
                .map(|(x, m)| if *m { 0.0 } else { *x })
                .collect()
        };
        Zonotope {
            center: zero(&self.center),
            generators: self.generators.iter().map(|g| zero(g)).collect(),
        }
    }

    /// Removes generators that are exactly zero. The point set is unchanged.
    pub fn without_zero_generators(mut self) -> Zonotope {
        self.generators.retain(|g| g.iter().any(|v| *v != 0.0));
        self
    }

    /// Membership test: is there `β ∈ [-1,1]^n` with `|c + Gβ - p|_∞ ≤ tol`?
    ///
    /// Solved as the LP `min t  s.t. -t ≤ (c + Gβ - p)_d ≤ t`. A solver failure
    /// is reported as an error, never as non-membership.
    pub fn contains_point(&self, p: &[f64], tol: f64) -> Result<bool> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "membership point",
                expected: self.dim(),
                found: p.len(),
            });
        }
        if !self.interval_hull().contains(p, tol) {
            return Ok(false);
        }
        let n = self.num_generators();
        if n == 0 {
            return Ok(true);
        }
        // Variables: β_0..β_{n-1}, t.
        let mut objective = vec![0.0; n + 1];
        objective[n] = -1.0;
        let mut lp = LinearProgram::new(objective);
        for i in 0..n {
            lp.set_bounds(i, -1.0, 1.0);
        }
        lp.set_bounds(n, 0.0, f64::INFINITY);
        for d in 0..self.dim() {
            let offset = p[d] - self.center[d];
            let mut upper: Vec<f64> = self.generators.iter().map(|g| g[d]).collect();
            upper.push(-1.0);
            let mut lower: Vec<f64> = self.generators.iter().map(|g| -g[d]).collect();
            lower.push(-1.0);
            lp.add_le(upper, offset);
            lp.add_le(lower, -offset);
        }
        let outcome = linprog::solve(&lp, linprog::DEFAULT_TOL)?;
        match outcome.status {
            LpStatus::Optimal => {
                let t = outcome.solution.as_ref().map_or(f64::INFINITY, |s| s[n]);
                Ok(t <= tol)
            }
            other => Err(Error::LpNumericalFailure(format!(
                "membership program returned {other:?}"
            ))),
        }
    }

    /// Draws `count` points `c + Σ β_i g_i` with `β` uniform on `[-1,1]^n`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut beta = vec![0.0; self.num_generators()];
        (0..count)
            .map(|_| {
                for b in beta.iter_mut() {
                    *b = rng.gen_range(-1.0..=1.0);
                }
                self.eval(&beta)
            })
            .collect()
    }

    /// `Σ_d log (δg)_d`, used to rank zonotopes by size. Zero-width
    /// dimensions are floored at [`SIZE_FLOOR`].
    pub fn size_measure(&self) -> f64 {
        self.generator_abs_sum()
            .iter()
            .map(|r| r.max(SIZE_FLOOR).ln())
            .sum()
    }

    /// Geometric mean of the interval-hull side lengths, `(Π_d 2 (δg)_d)^{1/D}`.
    pub fn scaled_volume(&self) -> f64 {
        let radius = self.generator_abs_sum();
        if radius.contains(&0.0) {
            return 0.0;
        }
        let mean_log = radius.iter().map(|r| (2.0 * r).ln()).sum::<f64>() / radius.len() as f64;
        mean_log.exp()
    }
}

/// Over-approximates the union of zonotopes by the interval hull of their
/// interval hulls, returned as an axis-aligned zonotope with `D` generators.
pub fn merge_union(zs: &[Zonotope]) -> Result<Zonotope> {
    let first = zs.first().ok_or(Error::Empty("merge_union input"))?;
    let dim = first.dim();
    let mut lower = vec![f64::INFINITY; dim];
    let mut upper = vec![f64::NEG_INFINITY; dim];
    for z in zs {
        if z.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "merge_union",
                expected: dim,
                found: z.dim(),
            });
        }
        let hull = z.interval_hull();
        for d in 0..dim {
            lower[d] = lower[d].min(hull.lower[d]);
            upper[d] = upper[d].max(hull.upper[d]);
        }
    }
    Ok(IntervalHull { lower, upper }.to_zonotope())
}

pub(crate) fn dims_to_mask(dims: &[usize], dim: usize) -> Vec<bool> {
    let mut mask = vec![false; dim];
    for &d in dims {
        mask[d] = true;
    }
    mask
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
