//! Reliability thresholds on per-sample robustness scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::input::{build_input_set, InputShape, InputSpec};
use crate::analysis::verify::{min_score, robustness_scores};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{argmax, Network};
use crate::reach::{propagate_with, Direction, ReachOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    /// Smallest over-approximated score of the sample.
    pub score: f64,
    /// Whether the network's prediction matches the label.
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityPoint {
    pub theta: f64,
    /// Fraction of correct samples with score `> theta`.
    pub true_above: Option<f64>,
    /// Fraction of wrong samples with score `> theta`.
    pub false_above: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityCurve {
    pub correct_count: usize,
    pub wrong_count: usize,
    pub points: Vec<ReliabilityPoint>,
    /// Grid value maximizing `TA - FA`; `None` if either rate is undefined.
    pub best_theta: Option<f64>,
}

/// Smallest over-approximated score of each labelled sample relative to its
/// predicted class, in dataset order.
pub fn score_dataset(
    net: &Network,
    data: &Dataset,
    shape: &InputShape,
    opts: &ReachOptions,
) -> Result<Vec<ScoredSample>> {
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| Error::Dataset("reliability needs a labelled dataset".into()))?;
    data.features
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &label)| {
            let predicted = argmax(&net.forward(x)?);
            let spec = InputSpec {
                shape: shape.clone(),
                anchor: x.clone(),
            };
            let input = build_input_set(&spec, Some(&data.features))?;
            let rs = propagate_with(net, &input, Direction::Over, opts)?;
            Ok(ScoredSample {
                score: min_score(&robustness_scores(&rs, predicted)?),
                correct: predicted == label,
            })
        })
        .collect()
}

/// Sorted distinct scores, the default threshold grid.
pub fn default_thresholds(samples: &[ScoredSample]) -> Vec<f64> {
    let mut thetas: Vec<f64> = samples.iter().map(|s| s.score).collect();
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();
    thetas
}

/// Rates at each threshold. `thetas = None` uses [`default_thresholds`].
pub fn reliability_rates(
    samples: &[ScoredSample],
    thetas: Option<&[f64]>,
) -> Result<ReliabilityCurve> {
    if samples.is_empty() {
        return Err(Error::Empty("reliability samples"));
    }
    if samples.iter().any(|s| s.score.is_nan()) {
        return Err(Error::NonFinite("reliability score"));
    }
    let mut grid = match thetas {
        Some(t) => t.to_vec(),
        None => default_thresholds(samples),
    };
    if grid.iter().any(|t| t.is_nan()) {
        return Err(Error::NonFinite("reliability threshold"));
    }
    grid.sort_by(f64::total_cmp);

    let mut correct: Vec<f64> = samples.iter().filter(|s| s.correct).map(|s| s.score).collect();
    let mut wrong: Vec<f64> = samples.iter().filter(|s| !s.correct).map(|s| s.score).collect();
    correct.sort_by(f64::total_cmp);
    wrong.sort_by(f64::total_cmp);
    let above = |sorted: &[f64], theta: f64| -> Option<f64> {
        if sorted.is_empty() {
            return None;
        }
        let at_or_below = sorted.partition_point(|&s| s <= theta);
        Some((sorted.len() - at_or_below) as f64 / sorted.len() as f64)
    };

    let points: Vec<ReliabilityPoint> = grid
        .iter()
        .map(|&theta| ReliabilityPoint {
            theta,
            true_above: above(&correct, theta),
            false_above: above(&wrong, theta),
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for p in &points {
        if let (Some(ta), Some(fa)) = (p.true_above, p.false_above) {
            let gain = ta - fa;
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, p.theta));
            }
        }
    }
    Ok(ReliabilityCurve {
        correct_count: correct.len(),
        wrong_count: wrong.len(),
        points,
        best_theta: best.map(|(_, t)| t),
    })
}
