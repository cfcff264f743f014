//! Set-based approximation of `ReLU(Z)` and layer-by-layer propagation of
//! zonotope sets through a network.
//!
//! For a zonotope `Z` every output dimension is either entirely nonpositive
//! (mapped to zero, handled exactly by projection), entirely nonnegative
//! (left untouched) or crossing zero. The crossing dimensions split `Z` into
//! up to `2^|R|` orthant pieces `S_k`; each piece is approximated from the
//! outside ([`overapprox_quadrant`]) or from the inside
//! ([`underapprox_quadrant`]) by a zonotope with rescaled generators.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linprog::{self, LinearProgram, LpStatus};
use crate::network::Network;
use crate::zonotope::{dims_to_mask, merge_union, IntervalHull, Zonotope};

/// Default cap on the number of zonotopes held at once.
pub const DEFAULT_CEILING: usize = 1_000_000;

/// Returned by [`count_quadrants`] when `2^|R|` exceeds `2^62`.
pub const QUADRANT_COUNT_SATURATED: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Over,
    Under,
}

/// Partition of the dimensions of a zonotope by the sign of its interval hull.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DimClassification {
    /// `upper_d ≤ 0`: ReLU maps the dimension to zero.
    pub negative: Vec<usize>,
    /// `lower_d ≥ 0` (and not negative): ReLU is the identity.
    pub positive: Vec<usize>,
    /// Everything else, ascending.
    pub crossing: Vec<usize>,
}

pub fn classify_dims(z: &Zonotope) -> DimClassification {
    classify_hull(&z.interval_hull())
}

fn classify_hull(hull: &IntervalHull) -> DimClassification {
    let mut out = DimClassification::default();
    for d in 0..hull.dim() {
        if hull.upper[d] <= 0.0 {
            out.negative.push(d);
        } else if hull.lower[d] >= 0.0 {
            out.positive.push(d);
        } else {
            out.crossing.push(d);
        }
    }
    out
}

/// `2^|R|` for the crossing dimensions `R` of `z`.
pub fn count_quadrants(z: &Zonotope) -> u64 {
    quadrant_count(classify_dims(z).crossing.len())
}

fn quadrant_count(crossing: usize) -> u64 {
    if crossing > 62 {
        QUADRANT_COUNT_SATURATED
    } else {
        1u64 << crossing
    }
}

/// Bitmask over the ascending crossing-dimension list: bit `i` set means the
/// `i`-th crossing dimension is constrained nonpositive. Code 0 is the
/// all-nonnegative orthant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadrantCode(pub u64);

impl QuadrantCode {
    /// Dimensions constrained nonpositive by this code.
    pub fn nonpositive_dims(self, crossing: &[usize]) -> Vec<usize> {
        crossing
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < 64 && self.0 >> i & 1 == 1)
            .map(|(_, &d)| d)
            .collect()
    }
}

/// The over-approximation of one quadrant together with the per-generator
/// quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrantOverApprox {
    pub zonotope: Zonotope,
    /// Scaling factor `α_j ∈ [0, 1]` per generator.
    pub alphas: Vec<f64>,
    /// `o_j = sign(g_{j,d*})`.
    pub orientations: Vec<f64>,
    /// `s_j = +1` if the binding dimension is nonnegative in the quadrant, else `-1`.
    pub shift_signs: Vec<f64>,
}

/// Over-approximates the part of `z` lying in the orthant that is
/// nonpositive on `nonpositive` and nonnegative elsewhere.
///
/// `z` is expected to be projected already on its negative dimensions.
pub fn overapprox_quadrant(z: &Zonotope, nonpositive: &[usize]) -> Result<Zonotope> {
    overapprox_quadrant_detail(z, nonpositive).map(|o| o.zonotope)
}

pub fn overapprox_quadrant_detail(
    z: &Zonotope,
    nonpositive: &[usize],
) -> Result<QuadrantOverApprox> {
    let mask = checked_mask(z, nonpositive)?;
    Ok(overapprox_masked(z, &mask))
}

fn overapprox_masked(z: &Zonotope, mask: &[bool]) -> QuadrantOverApprox {
    let c = z.center();
    let abs_sum = z.generator_abs_sum();
    let n = z.num_generators();
    let mut center = c.to_vec();
    let mut generators = Vec::with_capacity(n);
    let mut alphas = Vec::with_capacity(n);
    let mut orientations = Vec::with_capacity(n);
    let mut shift_signs = Vec::with_capacity(n);

    for g in z.generators() {
        let mut alpha = 1.0;
        let mut binding: Option<usize> = None;
        for d in 0..z.dim() {
            let a = g[d].abs();
            if a == 0.0 {
                continue;
            }
            let alpha_d = if mask[d] {
                let t = c[d] + 2.0 * a - abs_sum[d];
                if t > 0.0 {
                    1.0 - t / (2.0 * a)
                } else {
                    1.0
                }
            } else {
                let t = c[d] - 2.0 * a + abs_sum[d];
                if t < 0.0 {
                    1.0 + t / (2.0 * a)
                } else {
                    1.0
                }
            }
            .clamp(0.0, 1.0);
            if alpha_d < alpha {
                alpha = alpha_d;
                binding = Some(d);
            }
        }
        let (o, s) = match binding {
            Some(d) => (g[d].signum(), if mask[d] { -1.0 } else { 1.0 }),
            None => (1.0, 1.0),
        };
        let shift = s * (1.0 - alpha) * o;
        if shift != 0.0 {
            for (cd, gd) in center.iter_mut().zip(g) {
                *cd += shift * gd;
            }
        }
        generators.push(g.iter().map(|v| alpha * v).collect());
        alphas.push(alpha);
        orientations.push(o);
        shift_signs.push(s);
    }

    QuadrantOverApprox {
        zonotope: Zonotope::from_parts_unchecked(center, generators),
        alphas,
        orientations,
        shift_signs,
    }
}

/// Under-approximates the quadrant piece of `z` by a zonotope with generators
/// `α_i g_i` and center `c + Σ δ_i g_i`, maximizing `Σ α_i` subject to
/// `|δ_i| ≤ 1 - α_i` and the quadrant's sign constraints on the interval hull.
///
/// Returns `None` for an empty quadrant, and also when the LP solver fails
/// (dropping a piece keeps the under-approximation sound).
pub fn underapprox_quadrant(z: &Zonotope, nonpositive: &[usize]) -> Result<Option<Zonotope>> {
    let mask = checked_mask(z, nonpositive)?;
    underapprox_masked(z, &mask)
}

/// The program solved by [`underapprox_quadrant`]: variables
/// `α_0..α_{n-1}, δ_0..δ_{n-1}`, maximizing `Σ α_i`.
pub fn underapprox_program(z: &Zonotope, nonpositive: &[usize]) -> Result<LinearProgram> {
    let mask = checked_mask(z, nonpositive)?;
    Ok(underapprox_lp(z, &mask))
}

fn underapprox_lp(z: &Zonotope, mask: &[bool]) -> LinearProgram {
    let n = z.num_generators();
    let c = z.center();
    let mut objective = vec![1.0; n];
    objective.extend(std::iter::repeat_n(0.0, n));
    let mut lp = LinearProgram::new(objective);
    for i in 0..n {
        lp.set_bounds(i, 0.0, 1.0);
        lp.set_bounds(n + i, -1.0, 1.0);
        let mut plus = vec![0.0; 2 * n];
        plus[i] = 1.0;
        plus[n + i] = 1.0;
        let mut minus = vec![0.0; 2 * n];
        minus[i] = 1.0;
        minus[n + i] = -1.0;
        lp.add_le(plus, 1.0);
        lp.add_le(minus, 1.0);
    }
    for d in 0..z.dim() {
        let mut row = vec![0.0; 2 * n];
        for (i, g) in z.generators().iter().enumerate() {
            row[n + i] = g[d];
            row[i] = if mask[d] { g[d].abs() } else { -g[d].abs() };
        }
        if mask[d] {
            // c_d + Σ δ_i g_id + Σ α_i |g_id| ≤ 0
            lp.add_le(row, -c[d]);
        } else {
            // c_d + Σ δ_i g_id - Σ α_i |g_id| ≥ 0
            lp.add_ge(row, -c[d]);
        }
    }
    lp
}

fn underapprox_masked(z: &Zonotope, mask: &[bool]) -> Result<Option<Zonotope>> {
    let n = z.num_generators();
    let c = z.center();
    if n == 0 {
        let inside = c
            .iter()
            .zip(mask)
            .all(|(v, m)| if *m { *v <= 0.0 } else { *v >= 0.0 });
        return Ok(inside.then(|| z.clone()));
    }
    let lp = underapprox_lp(z, mask);
    let outcome = linprog::solve(&lp, linprog::DEFAULT_TOL)?;
    if outcome.status != LpStatus::Optimal {
        return Ok(None);
    }
    let x = outcome.solution.expect("optimal outcome carries a solution");
    let mut center = c.to_vec();
    let mut generators = Vec::with_capacity(n);
    for (i, g) in z.generators().iter().enumerate() {
        let alpha = x[i].clamp(0.0, 1.0);
        let slack = 1.0 - alpha;
        let delta = x[n + i].clamp(-slack, slack);
        for (cd, gd) in center.iter_mut().zip(g) {
            *cd += delta * gd;
        }
        generators.push(g.iter().map(|v| alpha * v).collect());
    }
    Ok(Some(Zonotope::from_parts_unchecked(center, generators)))
}

fn checked_mask(z: &Zonotope, dims: &[usize]) -> Result<Vec<bool>> {
    if let Some(&bad) = dims.iter().find(|&&d| d >= z.dim()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            dim: z.dim(),
        });
    }
    Ok(dims_to_mask(dims, z.dim()))
}

/// Where a zonotope in a [`ReachSet`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "code")]
pub enum Origin {
    Input,
    Quadrant(QuadrantCode),
    /// Positive part of the interval hull (amplification limit hit).
    PositiveHull,
    /// Interval-hull union of zonotopes evicted by the zonotope budget.
    Merged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Index of the parent zonotope in the previous layer's set.
    pub parent: Option<usize>,
    pub origin: Origin,
}

/// An ordered set of zonotopes approximating a reachable set from one side.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachSet {
    direction: Direction,
    zonotopes: Vec<Zonotope>,
    provenance: Vec<Provenance>,
}

impl ReachSet {
    pub fn new(direction: Direction, zonotopes: Vec<Zonotope>, provenance: Vec<Provenance>) -> Self {
        assert_eq!(zonotopes.len(), provenance.len());
        Self {
            direction,
            zonotopes,
            provenance,
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn zonotopes(&self) -> &[Zonotope] {
        &self.zonotopes
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.zonotopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zonotopes.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Zonotope> {
        self.zonotopes.iter()
    }

    /// Is `p` in some member zonotope (within `tol`)?
    pub fn contains_point(&self, p: &[f64], tol: f64) -> Result<bool> {
        for z in &self.zonotopes {
            if z.interval_hull().contains(p, tol) && z.contains_point(p, tol)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Interval hull of the union, `None` when empty.
    pub fn interval_hull(&self) -> Option<IntervalHull> {
        if self.is_empty() {
            return None;
        }
        merge_union(&self.zonotopes).ok().map(|z| z.interval_hull())
    }
}

impl<'a> IntoIterator for &'a ReachSet {
    type Item = &'a Zonotope;
    type IntoIter = std::slice::Iter<'a, Zonotope>;

    fn into_iter(self) -> Self::IntoIter {
        self.zonotopes.iter()
    }
}

/// Caps on amplification (`max_amp`, zonotopes per ReLU image of one
/// zonotope) and on the total number of zonotopes per layer (`max_zono`).
/// `None` means unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Budget {
    max_amp: Option<usize>,
    max_zono: Option<usize>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn new(max_amp: Option<usize>, max_zono: Option<usize>) -> Result<Self> {
        if max_amp == Some(0) || max_zono == Some(0) {
            return Err(Error::InvalidArgument(
                "budget limits must be at least 1".into(),
            ));
        }
        Ok(Self { max_amp, max_zono })
    }

    pub fn max_amp(&self) -> Option<usize> {
        self.max_amp
    }

    pub fn max_zono(&self) -> Option<usize> {
        self.max_zono
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReachOptions {
    pub budget: Budget,
    /// Hard ceiling on zonotopes materialized at once; exceeding it is an error.
    pub ceiling: usize,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self {
            budget: Budget::unlimited(),
            ceiling: DEFAULT_CEILING,
        }
    }
}

type Piece = (Zonotope, Origin);

fn over_pieces(
    z: &Zonotope,
    class: &DimClassification,
    max_amp: Option<usize>,
) -> Vec<Piece> {
    let negative = dims_to_mask(&class.negative, z.dim());
    let projected = z.project_mask(&negative);
    let count = quadrant_count(class.crossing.len());
    if max_amp.is_some_and(|a| count > a as u64) {
        let hull = projected.interval_hull().positive_part().to_zonotope();
        return vec![(hull.without_zero_generators(), Origin::PositiveHull)];
    }
    (0..count)
        .map(|code| {
            let code = QuadrantCode(code);
            let mask = dims_to_mask(&code.nonpositive_dims(&class.crossing), z.dim());
            let over = overapprox_masked(&projected, &mask).zonotope;
            (
                over.project_mask(&mask).without_zero_generators(),
                Origin::Quadrant(code),
            )
        })
        .collect()
}

fn under_pieces(
    z: &Zonotope,
    class: &DimClassification,
    max_amp: Option<usize>,
    ceiling: usize,
) -> Result<Vec<Piece>> {
    let negative = dims_to_mask(&class.negative, z.dim());
    let projected = z.project_mask(&negative);
    let count = quadrant_count(class.crossing.len());
    let mut out = Vec::new();
    for code in 0..count {
        if code >= ceiling as u64 {
            return Err(Error::ResourceLimit {
                needed: count,
                limit: ceiling,
            });
        }
        let code = QuadrantCode(code);
        let mask = dims_to_mask(&code.nonpositive_dims(&class.crossing), z.dim());
        if let Some(under) = underapprox_masked(&projected, &mask)? {
            out.push((
                under.project_mask(&mask).without_zero_generators(),
                Origin::Quadrant(code),
            ));
            if max_amp.is_some_and(|a| out.len() >= a) {
                break;
            }
        }
    }
    Ok(out)
}

fn single_provenance(pieces: Vec<Piece>, direction: Direction) -> ReachSet {
    let (zonotopes, provenance) = pieces
        .into_iter()
        .map(|(z, origin)| {
            (
                z,
                Provenance {
                    parent: Some(0),
                    origin,
                },
            )
        })
        .unzip();
    ReachSet::new(direction, zonotopes, provenance)
}

/// Over-approximates `ReLU(z)` by one zonotope per quadrant, or by the
/// positive part of the interval hull when the quadrant count exceeds `max_amp`.
pub fn rso_relu(z: &Zonotope, max_amp: Option<usize>) -> Result<ReachSet> {
    let class = classify_dims(z);
    check_over_count(&class, max_amp, DEFAULT_CEILING)?;
    Ok(single_provenance(
        over_pieces(z, &class, max_amp),
        Direction::Over,
    ))
}

/// Under-approximates `ReLU(z)` by the nonempty quadrant pieces, taken in
/// quadrant-code order and stopping after `max_amp` of them.
pub fn rsu_relu(z: &Zonotope, max_amp: Option<usize>) -> Result<ReachSet> {
    let class = classify_dims(z);
    Ok(single_provenance(
        under_pieces(z, &class, max_amp, DEFAULT_CEILING)?,
        Direction::Under,
    ))
}

fn check_over_count(
    class: &DimClassification,
    max_amp: Option<usize>,
    ceiling: usize,
) -> Result<u64> {
    let count = quadrant_count(class.crossing.len());
    let produced = match max_amp {
        Some(a) if count > a as u64 => 1,
        _ => count,
    };
    if produced > ceiling as u64 {
        return Err(Error::ResourceLimit {
            needed: produced,
            limit: ceiling,
        });
    }
    Ok(produced)
}

/// Applies ReLU to every zonotope of a layer set. Output order is by parent
/// index, then quadrant code, regardless of how work is scheduled.
fn relu_layer(
    set: &[Zonotope],
    direction: Direction,
    opts: &ReachOptions,
) -> Result<(Vec<Zonotope>, Vec<Provenance>)> {
    let max_amp = opts.budget.max_amp();
    let classes: Vec<DimClassification> = set.par_iter().map(classify_dims).collect();
    let mut bound: u64 = 0;
    for class in &classes {
        let produced = match direction {
            Direction::Over => check_over_count(class, max_amp, opts.ceiling)?,
            Direction::Under => {
                let count = quadrant_count(class.crossing.len());
                max_amp.map_or(count, |a| count.min(a as u64))
            }
        };
        bound = bound.saturating_add(produced);
    }
    if bound > opts.ceiling as u64 {
        return Err(Error::ResourceLimit {
            needed: bound,
            limit: opts.ceiling,
        });
    }

    let pieces: Vec<Vec<Piece>> = set
        .par_iter()
        .zip(classes.par_iter())
        .map(|(z, class)| match direction {
            Direction::Over => Ok(over_pieces(z, class, max_amp)),
            Direction::Under => under_pieces(z, class, max_amp, opts.ceiling),
        })
        .collect::<Result<_>>()?;

    let mut zonotopes = Vec::new();
    let mut provenance = Vec::new();
    let mut seen_points: HashSet<Vec<u64>> = HashSet::new();
    for (parent, group) in pieces.into_iter().enumerate() {
        for (z, origin) in group {
            if z.num_generators() == 0 {
                let key = z.center().iter().map(|v| (v + 0.0).to_bits()).collect();
                if !seen_points.insert(key) {
                    continue;
                }
            }
            zonotopes.push(z);
            provenance.push(Provenance {
                parent: Some(parent),
                origin,
            });
        }
    }
    Ok((zonotopes, provenance))
}

/// Enforces `max_zono`: Over keeps the `B - 1` largest zonotopes by
/// [`Zonotope::size_measure`] and merges the rest into one; Under keeps the
/// `B` largest and drops the rest.
fn enforce_zono_budget(
    zonotopes: Vec<Zonotope>,
    provenance: Vec<Provenance>,
    direction: Direction,
    max_zono: Option<usize>,
) -> Result<(Vec<Zonotope>, Vec<Provenance>)> {
    let Some(limit) = max_zono else {
        return Ok((zonotopes, provenance));
    };
    if zonotopes.len() <= limit {
        return Ok((zonotopes, provenance));
    }
    let sizes: Vec<f64> = zonotopes.par_iter().map(Zonotope::size_measure).collect();
    let mut order: Vec<usize> = (0..zonotopes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].total_cmp(&sizes[a]).then(a.cmp(&b)));
    let mut keep = vec![false; zonotopes.len()];
    let kept = match direction {
        Direction::Over => limit - 1,
        Direction::Under => limit,
    };
    for &i in &order[..kept] {
        keep[i] = true;
    }

    let mut kept_z = Vec::with_capacity(limit);
    let mut kept_p = Vec::with_capacity(limit);
    let mut evicted = Vec::new();
    for ((z, p), k) in zonotopes.into_iter().zip(provenance).zip(keep) {
        if k {
            kept_z.push(z);
            kept_p.push(p);
        } else {
            evicted.push(z);
        }
    }
    if direction == Direction::Over {
        kept_z.push(merge_union(&evicted)?);
        kept_p.push(Provenance {
            parent: None,
            origin: Origin::Merged,
        });
    }
    Ok((kept_z, kept_p))
}

/// Propagates `input` through `net` with no budget and the default ceiling.
pub fn propagate(net: &Network, input: &Zonotope, direction: Direction) -> Result<ReachSet> {
    propagate_with(net, input, direction, &ReachOptions::default())
}

/// Propagates `input` through `net` under `budget` with the default ceiling.
pub fn propagate_limited(
    net: &Network,
    input: &Zonotope,
    direction: Direction,
    budget: Budget,
) -> Result<ReachSet> {
    propagate_with(
        net,
        input,
        direction,
        &ReachOptions {
            budget,
            ceiling: DEFAULT_CEILING,
        },
    )
}

pub fn propagate_with(
    net: &Network,
    input: &Zonotope,
    direction: Direction,
    opts: &ReachOptions,
) -> Result<ReachSet> {
    if input.dim() != net.input_width() {
        return Err(Error::DimensionMismatch {
            context: "input zonotope",
            expected: net.input_width(),
            found: input.dim(),
        });
    }
    let mut zonotopes = vec![input.clone()];
    let mut provenance = vec![Provenance {
        parent: None,
        origin: Origin::Input,
    }];
    let last = net.layers().len() - 1;
    for (k, layer) in net.layers().iter().enumerate() {
        zonotopes = zonotopes
            .par_iter()
            .map(|z| z.linear_transform(&layer.weights, &layer.bias))
            .collect::<Result<_>>()?;
        if k == last {
            break;
        }
        let (z, p) = relu_layer(&zonotopes, direction, opts)?;
        let (z, p) = enforce_zono_budget(z, p, direction, opts.budget.max_zono())?;
        zonotopes = z;
        provenance = p;
    }
    Ok(ReachSet::new(direction, zonotopes, provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DenseLayer, Task};
    use crate::zonotope::MEMBERSHIP_TOL;
    use approx::assert_relative_eq;

    fn example_one() -> Zonotope {
        Zonotope::new(
            vec![6.0, 1.0],
            vec![vec![3.0, 0.0], vec![2.0, 3.0], vec![0.0, 0.5]],
        )
        .unwrap()
    }

    #[test]
    fn classification_of_example() {
        let class = classify_dims(&example_one());
        assert!(class.negative.is_empty());
        assert_eq!(class.crossing, vec![1]);
        assert_eq!(class.positive, vec![0]);
        assert_eq!(count_quadrants(&example_one()), 2);
    }

    #[test]
    fn classification_boundaries() {
        let neg = Zonotope::point(vec![-1.0, -1.0]).unwrap();
        assert_eq!(classify_dims(&neg).negative, vec![0, 1]);
        // An all-zero dimension is treated as negative.
        let zero = Zonotope::point(vec![0.0, 2.0]).unwrap();
        let class = classify_dims(&zero);
        assert_eq!(class.negative, vec![0]);
        assert_eq!(class.positive, vec![1]);
        assert_eq!(count_quadrants(&zero), 1);

        let crossing = Zonotope::axis_box(vec![0.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(count_quadrants(&crossing), 8);
    }

    #[test]
    fn quadrant_count_saturates() {
        assert_eq!(quadrant_count(62), 1 << 62);
        assert_eq!(quadrant_count(63), QUADRANT_COUNT_SATURATED);
    }

    #[test]
    fn quadrant_code_bits() {
        let crossing = [1, 3, 4];
        assert!(QuadrantCode(0).nonpositive_dims(&crossing).is_empty());
        assert_eq!(QuadrantCode(0b101).nonpositive_dims(&crossing), vec![1, 4]);
    }

    #[test]
    fn overapprox_hand_example() {
        let z = Zonotope::new(
            vec![0.0, 0.0],
            vec![vec![3.0, 0.0], vec![2.0, 3.0], vec![0.0, 0.5]],
        )
        .unwrap();
        let over = overapprox_quadrant_detail(&z, &[]).unwrap();
        let expected_alpha = [5.0 / 6.0, 7.0 / 12.0, 1.0];
        for (a, e) in over.alphas.iter().zip(expected_alpha) {
            assert_relative_eq!(*a, e, epsilon = 1e-15);
        }
        let c = over.zonotope.center();
        assert_relative_eq!(c[0], 4.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(c[1], 5.0 / 4.0, epsilon = 1e-14);
        let expected = [[2.5, 0.0], [7.0 / 6.0, 7.0 / 4.0], [0.0, 0.5]];
        for (g, e) in over.zonotope.generators().iter().zip(expected) {
            assert_relative_eq!(g[0], e[0], epsilon = 1e-14);
            assert_relative_eq!(g[1], e[1], epsilon = 1e-14);
        }
    }

    #[test]
    fn overapprox_is_identity_inside_quadrant() {
        let z = Zonotope::new(vec![5.0, 5.0], vec![vec![1.0, -1.0], vec![0.5, 2.0]]).unwrap();
        assert_eq!(overapprox_quadrant(&z, &[]).unwrap(), z);
        assert!(overapprox_quadrant(&z, &[2]).is_err());
    }

    #[test]
    fn underapprox_identity_and_empty() {
        let z = Zonotope::new(vec![5.0, 5.0], vec![vec![1.0, -1.0], vec![0.5, 2.0]]).unwrap();
        let under = underapprox_quadrant(&z, &[]).unwrap().unwrap();
        for (a, b) in under.center().iter().zip(z.center()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
        for (ga, gb) in under.generators().iter().zip(z.generators()) {
            for (a, b) in ga.iter().zip(gb) {
                assert_relative_eq!(*a, *b, epsilon = 1e-12);
            }
        }
        assert!(underapprox_quadrant(&z, &[0]).unwrap().is_none());
        assert!(underapprox_quadrant(&z, &[0, 1]).unwrap().is_none());
    }

    #[test]
    fn underapprox_crossing_piece_lies_in_quadrant() {
        let z = example_one();
        for dims in [vec![], vec![1]] {
            let under = underapprox_quadrant(&z, &dims).unwrap().unwrap();
            let hull = under.interval_hull();
            if dims.is_empty() {
                assert!(hull.lower[1] >= -1e-12);
            } else {
                assert!(hull.upper[1] <= 1e-12);
            }
            for p in under.sample(200, 5) {
                assert!(z.contains_point(&p, MEMBERSHIP_TOL).unwrap());
            }
        }
    }

    #[test]
    fn rso_trivial_cases() {
        let pos = Zonotope::new(vec![5.0, 5.0], vec![vec![1.0, -1.0], vec![0.5, 2.0]]).unwrap();
        let rs = rso_relu(&pos, None).unwrap();
        assert_eq!(rs.zonotopes(), std::slice::from_ref(&pos));

        let neg = Zonotope::new(vec![-5.0, -5.0], vec![vec![1.0, -1.0]]).unwrap();
        let rs = rso_relu(&neg, None).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs.zonotopes()[0].center(), &[0.0, 0.0]);
        assert_eq!(rs.zonotopes()[0].num_generators(), 0);
    }

    #[test]
    fn rso_example_two_pieces_and_fallback() {
        let rs = rso_relu(&example_one(), None).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(
            rs.provenance()[1].origin,
            Origin::Quadrant(QuadrantCode(1))
        );
        // Second piece is projected on the crossing dimension.
        assert!(rs.zonotopes()[1].generators().iter().all(|g| g[1] == 0.0));

        let limited = rso_relu(&example_one(), Some(1)).unwrap();
        assert_eq!(limited.len(), 1);
        let hull = limited.zonotopes()[0].interval_hull();
        assert_eq!(hull.lower, vec![1.0, 0.0]);
        assert_eq!(hull.upper, vec![11.0, 4.5]);
    }

    #[test]
    fn rsu_trivial_cases() {
        let pos = Zonotope::new(vec![5.0, 5.0], vec![vec![1.0, -1.0]]).unwrap();
        let rs = rsu_relu(&pos, None).unwrap();
        assert_eq!(rs.len(), 1);
        let neg = Zonotope::new(vec![-5.0, -5.0], vec![vec![1.0, -1.0]]).unwrap();
        let rs = rsu_relu(&neg, None).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs.zonotopes()[0].center(), &[0.0, 0.0]);
        assert_eq!(rs.zonotopes()[0].num_generators(), 0);
    }

    #[test]
    fn rsu_respects_amplification() {
        let z = Zonotope::axis_box(vec![0.1, -0.1, 0.2], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(rsu_relu(&z, None).unwrap().len(), 8);
        assert_eq!(rsu_relu(&z, Some(3)).unwrap().len(), 3);
    }

    fn one_neuron() -> Network {
        Network::new(
            vec![
                DenseLayer::new(vec![vec![1.0]], vec![0.0]),
                DenseLayer::new(vec![vec![1.0]], vec![0.0]),
            ],
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn one_neuron_interval() {
        let input = Zonotope::new(vec![0.0], vec![vec![1.0]]).unwrap();
        for direction in [Direction::Over, Direction::Under] {
            let rs = propagate(&one_neuron(), &input, direction).unwrap();
            let hull = rs.interval_hull().unwrap();
            assert_relative_eq!(hull.lower[0], 0.0, epsilon = 1e-12);
            assert_relative_eq!(hull.upper[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_network_passes_input_through() {
        let net = Network::new(
            vec![DenseLayer::new(
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![0.0, 0.0],
            )],
            Task::Regression,
        )
        .unwrap();
        let z = Zonotope::new(vec![1.0, 2.0], vec![vec![0.5, 0.5]]).unwrap();
        let rs = propagate(&net, &z, Direction::Over).unwrap();
        assert_eq!(rs.zonotopes(), std::slice::from_ref(&z));
        assert!(propagate(&net, &Zonotope::point(vec![1.0]).unwrap(), Direction::Over).is_err());
    }

    #[test]
    fn ceiling_is_reported() {
        let width = 12;
        let identity: Vec<Vec<f64>> = (0..width)
            .map(|i| (0..width).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let net = Network::new(
            vec![
                DenseLayer::new(identity.clone(), vec![0.0; width]),
                DenseLayer::new(identity, vec![0.0; width]),
            ],
            Task::Regression,
        )
        .unwrap();
        let input = Zonotope::axis_box(vec![0.0; width], &vec![1.0; width]).unwrap();
        let opts = ReachOptions {
            budget: Budget::unlimited(),
            ceiling: 1000,
        };
        assert!(matches!(
            propagate_with(&net, &input, Direction::Over, &opts),
            Err(Error::ResourceLimit { needed: 4096, limit: 1000 })
        ));
        let limited = ReachOptions {
            budget: Budget::new(Some(1), Some(1)).unwrap(),
            ceiling: 1000,
        };
        assert_eq!(
            propagate_with(&net, &input, Direction::Over, &limited)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn budget_rejects_zero() {
        assert!(Budget::new(Some(0), None).is_err());
        assert!(Budget::new(None, Some(0)).is_err());
    }

    #[test]
    fn zono_budget_merges_smallest() {
        let big = Zonotope::axis_box(vec![0.0, 0.0], &[3.0, 3.0]).unwrap();
        let small = Zonotope::axis_box(vec![10.0, 10.0], &[0.1, 0.1]).unwrap();
        let tiny = Zonotope::axis_box(vec![-10.0, 5.0], &[0.01, 0.01]).unwrap();
        let prov = vec![
            Provenance {
                parent: Some(0),
                origin: Origin::Input
            };
            3
        ];
        let (z, p) = enforce_zono_budget(
            vec![small.clone(), big.clone(), tiny.clone()],
            prov.clone(),
            Direction::Over,
            Some(2),
        )
        .unwrap();
        assert_eq!(z.len(), 2);
        assert_eq!(z[0], big);
        assert_eq!(p[1].origin, Origin::Merged);
        let hull = z[1].interval_hull();
        assert_relative_eq!(hull.lower[0], -10.01, epsilon = 1e-12);
        assert_relative_eq!(hull.upper[1], 10.1, epsilon = 1e-12);

        let (z, _) =
            enforce_zono_budget(vec![small.clone(), big.clone(), tiny], prov, Direction::Under, Some(2))
                .unwrap();
        assert_eq!(z, vec![small, big]);
    }
}
