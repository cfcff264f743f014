#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reachzono::linprog::LinearProgram;
use reachzono::{DenseLayer, Network, Task, Zonotope};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Random zonotope with dimension in `1..=max_dim` and `0..=max_gens` generators.
pub fn random_zonotope(rng: &mut ChaCha8Rng, max_dim: usize, max_gens: usize) -> Zonotope {
    let dim = rng.gen_range(1..=max_dim);
    let n = rng.gen_range(0..=max_gens);
    random_zonotope_shape(rng, dim, n)
}

pub fn random_zonotope_shape(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Zonotope {
    let center = random_vec(rng, dim, 1.0);
    let gens = (0..n).map(|_| random_vec(rng, dim, 1.0)).collect();
    Zonotope::new(center, gens).unwrap()
}

/// Random dense ReLU network with the given widths.
pub fn random_network(rng: &mut ChaCha8Rng, widths: &[usize], task: Task) -> Network {
    let layers = widths
        .windows(2)
        .map(|w| {
            let weights = (0..w[1]).map(|_| random_vec(rng, w[0], 1.0)).collect();
            DenseLayer::new(weights, random_vec(rng, w[1], 0.5))
        })
        .collect();
    Network::new(layers, task).unwrap()
}

/// Random widths `[input, hidden.., output]` with every width in `1..=max_width`.
pub fn random_widths(rng: &mut ChaCha8Rng, max_width: usize, max_depth: usize) -> Vec<usize> {
    let depth = rng.gen_range(1..=max_depth);
    (0..=depth).map(|_| rng.gen_range(1..=max_width)).collect()
}

pub fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// All `2^n` vertices `c + Σ ±g_i`.
pub fn corners(z: &Zonotope) -> Vec<Vec<f64>> {
    let n = z.num_generators();
    (0..1u64 << n)
        .map(|mask| {
            let beta: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            z.eval(&beta)
        })
        .collect()
}

/// Optimum of `max objective·x` over a bounded polytope, found by solving
/// every `n × n` subsystem of active constraints. `None` when infeasible.
pub fn vertex_enumeration_max(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // Collect every constraint as a·x ≤ b.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, rhs) in lp.rows().iter().zip(lp.rhs()) {
        rows.push((row.clone(), *rhs));
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        rows.push((e.clone(), lp.upper()[i]));
        e[i] = -1.0;
        rows.push((e, -lp.lower()[i]));
    }
    let feasible = |x: &[f64]| {
        rows.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
            lhs <= b + 1e-7 * (1.0 + b.abs())
        })
    };
    let mut best: Option<f64> = None;
    let mut chosen = Vec::with_capacity(n);
    combinations(rows.len(), n, 0, &mut chosen, &mut |idx| {
        let a = DMatrix::from_fn(n, n, |r, c| rows[idx[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| rows[idx[r]].1);
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                let value: f64 = lp.objective().iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(value, |b: f64| b.max(value)));
            }
        }
    });
    best
}

fn combinations(
    total: usize,
    k: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for i in start..total {
        if total - i < k - chosen.len() {
            break;
        }
        chosen.push(i);
        combinations(total, k, i + 1, chosen, f);
        chosen.pop();
    }
}

/// Random feasible LP with finite bounds; constraints are built around an
/// interior point so the polytope is nonempty.
pub fn random_feasible_lp(rng: &mut ChaCha8Rng, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_rows);
    let mut lp = LinearProgram::new(random_vec(rng, n, 2.0));
    let mut x0 = Vec::with_capacity(n);
    for i in 0..n {
        let lo = rng.gen_range(-3.0..0.0);
        let hi = lo + rng.gen_range(0.1..4.0);
        lp.set_bounds(i, lo, hi);
        x0.push(rng.gen_range(lo..hi));
    }
    for _ in 0..m {
        let a = random_vec(rng, n, 1.0);
        let ax: f64 = a.iter().zip(&x0).map(|(ai, xi)| ai * xi).sum();
        let slack = rng.gen_range(0.0..1.0);
        if rng.gen::<bool>() {
            lp.add_le(a, ax + slack);
        } else {
            lp.add_ge(a, ax - slack);
        }
    }
    lp
}
