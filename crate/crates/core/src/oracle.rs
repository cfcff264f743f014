//! Brute-force and sampling baselines for checking reach sets and
//! certificates on small instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{argmax, Network};
use crate::zonotope::Zonotope;

/// Largest generator count [`brute_force_score`] will enumerate.
pub const MAX_BRUTE_FORCE_GENERATORS: usize = 20;
/// Largest number of nonzero generators [`grid_adversarial_search`] accepts.
pub const MAX_GRID_GENERATORS: usize = 3;
/// Grids coarser than this are flagged as such.
pub const FINE_GRID_RESOLUTION: usize = 100;
pub const DEFAULT_CORNER_FRACTION: f64 = 0.5;

// Keeps the corner stream independent of the interior stream for one seed.
const CORNER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSet {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub count: usize,
}

impl SampledSet {
    /// Per-dimension `(min, max)` over the points.
    pub fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let first = self.points.first()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in &self.points[1..] {
            for d in 0..p.len() {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        Some((lo, hi))
    }

    /// Per-dimension `max - min`.
    pub fn extents(&self) -> Option<Vec<f64>> {
        self.bounds()
            .map(|(lo, hi)| hi.iter().zip(&lo).map(|(h, l)| h - l).collect())
    }
}

/// Points of `input`: uniform interior samples first, then random vertices
/// (`β ∈ {-1,1}^n`), `round(count · corner_fraction)` of them.
pub fn sample_inputs(
    input: &Zonotope,
    count: usize,
    seed: u64,
    corner_fraction: f64,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&corner_fraction) {
        return Err(Error::InvalidArgument(format!(
            "corner fraction must lie in [0, 1], got {corner_fraction}"
        )));
    }
    let corners = ((count as f64) * corner_fraction).round() as usize;
    let mut points = input.sample(count - corners, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ CORNER_STREAM);
    let mut beta = vec![0.0; input.num_generators()];
    for _ in 0..corners {
        for b in beta.iter_mut() {
            *b = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        points.push(input.eval(&beta));
    }
    Ok(points)
}

/// Forward images of [`sample_inputs`], in the same order.
pub fn sample_reachable(
    net: &Network,
    input: &Zonotope,
    count: usize,
    seed: u64,
    corner_fraction: f64,
) -> Result<SampledSet> {
    if input.dim() != net.input_width() {
        return Err(Error::DimensionMismatch {
            context: "sampled input",
            expected: net.input_width(),
            found: input.dim(),
        });
    }
    let inputs = sample_inputs(input, count, seed, corner_fraction)?;
    let points = inputs
        .par_iter()
        .map(|x| net.forward(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampledSet {
        points,
        seed,
        count,
    })
}

/// `min (p_a - p_b)` over all `2^n` vertices of `z`.
pub fn brute_force_score(z: &Zonotope, a: usize, b: usize) -> Result<f64> {
    let n = z.num_generators();
    if n > MAX_BRUTE_FORCE_GENERATORS {
        return Err(Error::TooManyGenerators {
            found: n,
            limit: MAX_BRUTE_FORCE_GENERATORS,
        });
    }
    for idx in [a, b] {
        if idx >= z.dim() {
            return Err(Error::IndexOutOfRange {
                index: idx,
                dim: z.dim(),
            });
        }
    }
    // p_a - p_b = (c_a - c_b) + Σ β_i (g_i^a - g_i^b), evaluated per vertex.
    let base = z.center()[a] - z.center()[b];
    let diffs: Vec<f64> = z.generators().iter().map(|g| g[a] - g[b]).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << n) {
        let mut value = base;
        for (i, d) in diffs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                value += d;
            } else {
                value -= d;
            }
        }
        best = best.min(value);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    /// Misclassified grid input with the smallest `|β|∞`.
    pub witness: Option<Vec<f64>>,
    pub witness_class: Option<usize>,
    pub points_checked: u64,
    pub resolution: usize,
    /// Resolution below [`FINE_GRID_RESOLUTION`].
    pub coarse: bool,
}

/// Classifies every point of a `resolution^k` grid over the `k ≤ 3` nonzero
/// generators of `input`, looking for a class other than `a`.
pub fn grid_adversarial_search(
    net: &Network,
    input: &Zonotope,
    a: usize,
    resolution: usize,
) -> Result<GridSearch> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(
            "grid resolution must be at least 2".into(),
        ));
    }
    if a >= net.output_width() {
        return Err(Error::IndexOutOfRange {
            index: a,
            dim: net.output_width(),
        });
    }
    let reduced = input.clone().without_zero_generators();
    let k = reduced.num_generators();
    if k > MAX_GRID_GENERATORS {
        return Err(Error::TooManyGenerators {
            found: k,
            limit: MAX_GRID_GENERATORS,
        });
    }
    let total = (resolution as u64).pow(k as u32);
    let step = 2.0 / (resolution - 1) as f64;
    let coords = |mut idx: u64| -> Vec<f64> {
        (0..k)
            .map(|_| {
                let i = idx % resolution as u64;
                idx /= resolution as u64;
                -1.0 + step * i as f64
            })
            .collect()
    };

    let hit: Option<Hit> = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<Option<Hit>> {
            let beta = coords(idx);
            let x = reduced.eval(&beta);
            let class = argmax(&net.forward(&x)?);
            if class == a {
                return Ok(None);
            }
            let norm = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
            Ok(Some((norm, idx, x, class)))
        })
        .try_fold(
            || None,
            |best: Option<Hit>, item| {
                item.map(|cand| closer_opt(best, cand))
            },
        )
        .try_reduce(|| None, |l, r| Ok(closer_opt(l, r)))?;

    let (witness, witness_class) = match hit {
        Some((_, _, x, c)) => (Some(x), Some(c)),
        None => (None, None),
    };
    Ok(GridSearch {
        witness,
        witness_class,
        points_checked: total,
        resolution,
        coarse: resolution < FINE_GRID_RESOLUTION,
    })
}

type Hit = (f64, u64, Vec<f64>, usize);

fn closer_opt(l: Option<Hit>, r: Option<Hit>) -> Option<Hit> {
    match (l, r) {
        (None, x) | (x, None) => x,
        (Some(l), Some(r)) => {
            if (r.0, r.1) < (l.0, l.1) {
                Some(r)
            } else {
                Some(l)
            }
        }
    }
}

/// First of `count` sampled inputs (half vertices) classified other than `a`.
pub fn sampling_attack(
    net: &Network,
    input: &Zonotope,
    a: usize,
    count: usize,
    seed: u64,
) -> Result<Option<Vec<f64>>> {
    let inputs = sample_inputs(input, count, seed, DEFAULT_CORNER_FRACTION)?;
    let flags = inputs
        .par_iter()
        .map(|x| Ok(argmax(&net.forward(x)?) != a))
        .collect::<Result<Vec<bool>>>()?;
    Ok(flags
        .iter()
        .position(|&f| f)
        .map(|i| inputs[i].clone()))
}
