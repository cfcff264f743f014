//! Robustness scores, certificates and class-specific verification.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::input::{build_input_set, InputShape, InputSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::{argmax, Network};
use crate::reach::{propagate_with, Budget, Direction, ReachOptions, ReachSet, DEFAULT_CEILING};
use crate::zonotope::Zonotope;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: usize,
    pub score: f64,
}

/// `s_b = min_Z (c_a - c_b - Σ_i |g_i^a - g_i^b|)` for every class `b ≠ a`.
pub fn robustness_scores(rs: &ReachSet, a: usize) -> Result<Vec<ClassScore>> {
    let first = rs
        .zonotopes()
        .first()
        .ok_or(Error::Empty("reach set for robustness scores"))?;
    let classes = first.dim();
    if a >= classes {
        return Err(Error::IndexOutOfRange {
            index: a,
            dim: classes,
        });
    }
    Ok((0..classes)
        .filter(|&b| b != a)
        .map(|b| {
            let score = rs
                .iter()
                .map(|z| zonotope_margin(z, a, b))
                .fold(f64::INFINITY, f64::min);
            ClassScore { class: b, score }
        })
        .collect())
}

fn zonotope_margin(z: &Zonotope, a: usize, b: usize) -> f64 {
    let c = z.center();
    c[a] - c[b] - z.generators().iter().map(|g| (g[a] - g[b]).abs()).sum::<f64>()
}

/// Smallest score, `+∞` when there are no other classes.
pub fn min_score(scores: &[ClassScore]) -> f64 {
    scores.iter().map(|s| s.score).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Robust,
    NonRobust,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modes {
    Over,
    Under,
    #[default]
    Both,
}

impl Modes {
    pub fn over(self) -> bool {
        matches!(self, Modes::Over | Modes::Both)
    }

    pub fn under(self) -> bool {
        matches!(self, Modes::Under | Modes::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub budget: Budget,
    pub modes: Modes,
    pub ceiling: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            budget: Budget::unlimited(),
            modes: Modes::Both,
            ceiling: DEFAULT_CEILING,
        }
    }
}

impl VerifyConfig {
    pub fn reach_options(&self) -> ReachOptions {
        ReachOptions {
            budget: self.budget,
            ceiling: self.ceiling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassFlags {
    pub class: usize,
    /// Over-approximated score against this class is positive.
    pub robust: bool,
    /// Under-approximated score against this class is negative.
    pub non_robust: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Reference class `a` (the anchor's prediction unless set explicitly).
    pub predicted: usize,
    pub logits: Vec<f64>,
    pub scores_over: Option<Vec<ClassScore>>,
    pub scores_under: Option<Vec<ClassScore>>,
    pub certificate: Certificate,
    pub per_class: Vec<ClassFlags>,
    pub over_zonotopes: Option<usize>,
    pub under_zonotopes: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

/// Propagates `input` and certifies the prediction of its center.
pub fn verify(net: &Network, input: &Zonotope, config: &VerifyConfig) -> Result<VerificationReport> {
    let logits = net.forward(input.center())?;
    verify_against(net, input, argmax(&logits), config)
}

/// As [`verify`], but scores are taken relative to `reference` instead of the
/// predicted class.
pub fn verify_against(
    net: &Network,
    input: &Zonotope,
    reference: usize,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let logits = net.forward(input.center())?;
    if reference >= logits.len() {
        return Err(Error::IndexOutOfRange {
            index: reference,
            dim: logits.len(),
        });
    }
    let opts = config.reach_options();
    let mut diagnostics = Vec::new();

    let mut run = |direction: Direction| -> Result<Option<ReachSet>> {
        match propagate_with(net, input, direction, &opts) {
            Ok(rs) => Ok(Some(rs)),
            Err(e @ (Error::ResourceLimit { .. } | Error::LpNumericalFailure(_))) => {
                diagnostics.push(format!("{direction:?} propagation failed: {e}"));
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    let over = if config.modes.over() {
        run(Direction::Over)?
    } else {
        None
    };
    let under = if config.modes.under() {
        run(Direction::Under)?
    } else {
        None
    };

    let scores_over = match &over {
        Some(rs) => Some(robustness_scores(rs, reference)?),
        None => None,
    };
    let scores_under = match &under {
        Some(rs) if rs.is_empty() => {
            diagnostics.push("under-approximation is empty: no witness".into());
            None
        }
        Some(rs) => Some(robustness_scores(rs, reference)?),
        None => None,
    };

    let per_class: Vec<ClassFlags> = (0..logits.len())
        .filter(|&b| b != reference)
        .map(|b| {
            let find = |s: &Option<Vec<ClassScore>>| {
                s.as_ref()
                    .and_then(|v| v.iter().find(|c| c.class == b).map(|c| c.score))
            };
            ClassFlags {
                class: b,
                robust: find(&scores_over).is_some_and(|s| s > 0.0),
                non_robust: find(&scores_under).is_some_and(|s| s < 0.0),
            }
        })
        .collect();

    let certificate = if scores_over
        .as_ref()
        .is_some_and(|s| s.iter().all(|c| c.score > 0.0))
    {
        Certificate::Robust
    } else if scores_under
        .as_ref()
        .is_some_and(|s| s.iter().any(|c| c.score < 0.0))
    {
        Certificate::NonRobust
    } else {
        Certificate::Unknown
    };

    Ok(VerificationReport {
        predicted: reference,
        logits,
        scores_over,
        scores_under,
        certificate,
        per_class,
        over_zonotopes: over.as_ref().map(ReachSet::len),
        under_zonotopes: under.as_ref().map(ReachSet::len),
        diagnostics,
        wall_time_ms: Some(start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Fractions of samples of each true class certified robust / non-robust
/// against each other class. `None` on the diagonal and for classes with no
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMatrix {
    pub classes: usize,
    pub samples_per_class: Vec<usize>,
    pub robust: Vec<Vec<Option<f64>>>,
    pub non_robust: Vec<Vec<Option<f64>>>,
}

/// Class-specific verification over a labelled dataset. Scores are taken
/// relative to each sample's true class.
pub fn class_specific_matrix(
    net: &Network,
    data: &Dataset,
    shape: &InputShape,
    config: &VerifyConfig,
) -> Result<ClassMatrix> {
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| Error::Dataset("class-specific verification needs labels".into()))?;
    let classes = net.output_width();
    if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::IndexOutOfRange {
            index: *bad,
            dim: classes,
        });
    }
    let reports: Vec<VerificationReport> = data
        .features
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &label)| {
            let spec = InputSpec {
                shape: shape.clone(),
                anchor: x.clone(),
            };
            let input = build_input_set(&spec, Some(&data.features))?;
            verify_against(net, &input, label, config)
        })
        .collect::<Result<_>>()?;

    let mut counts = vec![0usize; classes];
    let mut robust = vec![vec![0usize; classes]; classes];
    let mut non_robust = vec![vec![0usize; classes]; classes];
    for (report, &label) in reports.iter().zip(labels) {
        counts[label] += 1;
        for flags in &report.per_class {
            robust[label][flags.class] += usize::from(flags.robust);
            non_robust[label][flags.class] += usize::from(flags.non_robust);
        }
    }
    let fractions = |table: &[Vec<usize>]| -> Vec<Vec<Option<f64>>> {
        (0..classes)
            .map(|t| {
                (0..classes)
                    .map(|b| (t != b && counts[t] > 0).then(|| table[t][b] as f64 / counts[t] as f64))
                    .collect()
            })
            .collect()
    };
    let robust = fractions(&robust);
    let non_robust = fractions(&non_robust);
    Ok(ClassMatrix {
        classes,
        samples_per_class: counts,
        robust,
        non_robust,
    })
}

fn require_over(rs: &ReachSet) -> Result<()> {
    if rs.direction() != Direction::Over {
        return Err(Error::InvalidArgument(
            "robust loss terms need an over-approximated reach set".into(),
        ));
    }
    if rs.is_empty() {
        return Err(Error::Empty("reach set for robust loss"));
    }
    Ok(())
}

/// `pred_loss + max_b ReLU(-s_b)` for correct predictions, `pred_loss` otherwise.
pub fn classification_robust_loss(
    rs_over: &ReachSet,
    a: usize,
    correct: bool,
    pred_loss: f64,
) -> Result<f64> {
    require_over(rs_over)?;
    let scores = robustness_scores(rs_over, a)?;
    if !correct {
        return Ok(pred_loss);
    }
    let penalty = scores
        .iter()
        .map(|s| (-s.score).max(0.0))
        .fold(0.0, f64::max);
    Ok(pred_loss + penalty)
}

/// Per-output width `max(c_a + δg_a) - min(c_a - δg_a)` over all zonotopes.
pub fn output_extensions(rs: &ReachSet) -> Result<Vec<f64>> {
    rs.interval_hull()
        .map(|h| h.widths())
        .ok_or(Error::Empty("reach set for output extents"))
}

/// `val_loss + ReLU(max_a l_a - l_in)`.
pub fn regression_robust_loss(rs_over: &ReachSet, l_in: f64, val_loss: f64) -> Result<f64> {
    require_over(rs_over)?;
    if !(l_in > 0.0 && l_in.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "input extent must be positive, got {l_in}"
        )));
    }
    let widest = output_extensions(rs_over)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(val_loss + (widest - l_in).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DenseLayer, Task};
    use crate::reach::{Origin, Provenance};

    fn set_of(direction: Direction, zs: Vec<Zonotope>) -> ReachSet {
        let prov = vec![
            Provenance {
                parent: None,
                origin: Origin::Input
            };
            zs.len()
        ];
        ReachSet::new(direction, zs, prov)
    }

    #[test]
    fn scores_of_point_logits() {
        let rs = set_of(
            Direction::Over,
            vec![Zonotope::point(vec![3.0, 1.0, 0.0]).unwrap()],
        );
        let s = robustness_scores(&rs, 0).unwrap();
        assert_eq!(
            s,
            vec![
                ClassScore { class: 1, score: 2.0 },
                ClassScore { class: 2, score: 3.0 }
            ]
        );
        assert!(robustness_scores(&rs, 3).is_err());
    }

    #[test]
    fn score_with_opposed_generator() {
        let rs = set_of(
            Direction::Over,
            vec![Zonotope::new(vec![1.0, 0.0], vec![vec![0.5, -0.5]]).unwrap()],
        );
        assert_eq!(robustness_scores(&rs, 0).unwrap()[0].score, 0.0);
    }

    #[test]
    fn scores_of_empty_set_fail() {
        let rs = set_of(Direction::Under, vec![]);
        assert!(matches!(robustness_scores(&rs, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn classification_loss_values() {
        let z = Zonotope::point(vec![0.0, 2.0, -1.0]).unwrap();
        let rs = set_of(Direction::Over, vec![z]);
        // s = (-2, 1)
        assert_eq!(classification_robust_loss(&rs, 0, true, 0.5).unwrap(), 2.5);
        assert_eq!(classification_robust_loss(&rs, 0, false, 0.5).unwrap(), 0.5);
        let safe = set_of(
            Direction::Over,
            vec![Zonotope::point(vec![5.0, 2.0, -1.0]).unwrap()],
        );
        assert_eq!(classification_robust_loss(&safe, 0, true, 0.25).unwrap(), 0.25);
        let under = set_of(Direction::Under, vec![Zonotope::point(vec![1.0, 0.0]).unwrap()]);
        assert!(classification_robust_loss(&under, 0, true, 0.0).is_err());
    }

    #[test]
    fn extents() {
        let point = set_of(Direction::Over, vec![Zonotope::point(vec![1.0, 2.0]).unwrap()]);
        assert_eq!(output_extensions(&point).unwrap(), vec![0.0, 0.0]);
        let boxed = set_of(
            Direction::Over,
            vec![Zonotope::axis_box(vec![0.0, 0.0], &[1.0, 2.0]).unwrap()],
        );
        assert_eq!(output_extensions(&boxed).unwrap(), vec![2.0, 4.0]);
        let two = set_of(
            Direction::Over,
            vec![
                Zonotope::point(vec![0.0]).unwrap(),
                Zonotope::point(vec![3.0]).unwrap(),
            ],
        );
        assert_eq!(output_extensions(&two).unwrap(), vec![3.0]);
        assert!(output_extensions(&set_of(Direction::Over, vec![])).is_err());
    }

    #[test]
    fn regression_loss_values() {
        let rs = set_of(
            Direction::Over,
            vec![
                Zonotope::point(vec![0.0, 0.0]).unwrap(),
                Zonotope::point(vec![3.0, 0.5]).unwrap(),
            ],
        );
        assert_eq!(regression_robust_loss(&rs, 1.0, 0.0).unwrap(), 2.0);
        assert_eq!(regression_robust_loss(&rs, 4.0, 0.7).unwrap(), 0.7);
        assert!(regression_robust_loss(&rs, 0.0, 0.7).is_err());
    }

    fn two_class_net() -> Network {
        // logits = (x, -x): class 0 for x > 0.
        Network::new(
            vec![DenseLayer::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0])],
            Task::Classification,
        )
        .unwrap()
    }

    #[test]
    fn zero_radius_verification_is_logit_margin() {
        let net = two_class_net();
        let z = Zonotope::point(vec![0.5]).unwrap();
        let report = verify(&net, &z, &VerifyConfig::default()).unwrap();
        assert_eq!(report.predicted, 0);
        assert_eq!(report.certificate, Certificate::Robust);
        assert_eq!(report.scores_over.as_ref().unwrap()[0].score, 1.0);
        assert_eq!(report.scores_under.as_ref().unwrap()[0].score, 1.0);

        let tie = verify(&net, &Zonotope::point(vec![0.0]).unwrap(), &VerifyConfig::default())
            .unwrap();
        assert_eq!(tie.predicted, 0);
        assert_eq!(tie.certificate, Certificate::Unknown);
    }

    #[test]
    fn non_robust_when_boundary_inside() {
        let net = two_class_net();
        let z = Zonotope::new(vec![0.1], vec![vec![0.5]]).unwrap();
        let report = verify(&net, &z, &VerifyConfig::default()).unwrap();
        assert_eq!(report.certificate, Certificate::NonRobust);
        assert!(report.per_class[0].non_robust);
        assert!(!report.per_class[0].robust);
    }

    #[test]
    fn over_only_mode_never_claims_non_robust() {
        let net = two_class_net();
        let z = Zonotope::new(vec![0.1], vec![vec![0.5]]).unwrap();
        let config = VerifyConfig {
            modes: Modes::Over,
            ..VerifyConfig::default()
        };
        let report = verify(&net, &z, &config).unwrap();
        assert_eq!(report.certificate, Certificate::Unknown);
        assert!(report.scores_under.is_none());
    }

    #[test]
    fn class_matrix_single_sample() {
        let net = two_class_net();
        let data = Dataset::new(vec![vec![1.0]], Some(vec![0])).unwrap();
        let m = class_specific_matrix(
            &net,
            &data,
            &InputShape::Cube { eps: 0.1 },
            &VerifyConfig::default(),
        )
        .unwrap();
        assert_eq!(m.robust[0][1], Some(1.0));
        assert_eq!(m.non_robust[0][1], Some(0.0));
        assert_eq!(m.robust[0][0], None);
        assert_eq!(m.robust[1][0], None);
        assert_eq!(m.samples_per_class, vec![1, 0]);
    }

    #[test]
    fn class_matrix_all_unknown() {
        // Constant logits: every score is exactly zero.
        let net = Network::new(
            vec![DenseLayer::new(vec![vec![0.0], vec![0.0]], vec![1.0, 1.0])],
            Task::Classification,
        )
        .unwrap();
        let data = Dataset::new(vec![vec![0.0], vec![1.0]], Some(vec![0, 1])).unwrap();
        let m = class_specific_matrix(
            &net,
            &data,
            &InputShape::Cube { eps: 0.1 },
            &VerifyConfig::default(),
        )
        .unwrap();
        assert_eq!(m.robust[0][1], Some(0.0));
        assert_eq!(m.robust[1][0], Some(0.0));
        assert_eq!(m.non_robust[0][1], Some(0.0));
        assert_eq!(m.non_robust[1][0], Some(0.0));
    }

    #[test]
    fn class_matrix_rejects_unlabelled() {
        let data = Dataset::new(vec![vec![1.0]], None).unwrap();
        assert!(class_specific_matrix(
            &two_class_net(),
            &data,
            &InputShape::Cube { eps: 0.1 },
            &VerifyConfig::default()
        )
        .is_err());
    }
}
