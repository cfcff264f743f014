//! Feature ranking by the output volume a single widened feature produces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::reach::{propagate_with, Direction, ReachOptions};
use crate::zonotope::Zonotope;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRank {
    pub feature: usize,
    /// Sum of scaled interval-hull volumes of the over-approximated outputs.
    pub volume: Option<f64>,
    /// 1-based; features whose propagation failed come last.
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Ranks features by widening one at a time to `delta` while the rest stay at
/// `eps_small`. Entries are returned in rank order.
pub fn rank_features(
    net: &Network,
    anchor: &[f64],
    delta: f64,
    eps_small: f64,
    opts: &ReachOptions,
) -> Result<Vec<FeatureRank>> {
    if !(eps_small > 0.0 && delta > eps_small && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "feature ranking needs delta > eps > 0, got delta {delta}, eps {eps_small}"
        )));
    }
    let dim = net.input_width();
    if anchor.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "ranking anchor",
            expected: dim,
            found: anchor.len(),
        });
    }

    let volumes: Vec<std::result::Result<f64, String>> = (0..dim)
        .into_par_iter()
        .map(|f| {
            let mut radii = vec![eps_small; dim];
            radii[f] = delta;
            let input = Zonotope::axis_box(anchor.to_vec(), &radii).map_err(|e| e.to_string())?;
            let rs = propagate_with(net, &input, Direction::Over, opts).map_err(|e| e.to_string())?;
            Ok(rs.iter().map(Zonotope::scaled_volume).sum())
        })
        .collect();

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| match (&volumes[i], &volumes[j]) {
        (Ok(a), Ok(b)) => b.total_cmp(a).then(i.cmp(&j)),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => i.cmp(&j),
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(pos, f)| {
            let (volume, error) = match &volumes[f] {
                Ok(v) => (Some(*v), None),
                Err(e) => (None, Some(e.clone())),
            };
            FeatureRank {
                feature: f,
                volume,
                rank: pos + 1,
                error,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DenseLayer, Task};

    #[test]
    fn single_feature() {
        let net = Network::new(vec![DenseLayer::new(vec![vec![2.0]], vec![0.0])], Task::Regression)
            .unwrap();
        let r = rank_features(&net, &[0.0], 0.1, 0.01, &ReachOptions::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].rank, 1);
        assert!((r[0].volume.unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn linear_weights_order_features() {
        // y = 5 x1 + x2, widths 2(5δ + ε) vs 2(5ε + δ).
        let net = Network::new(
            vec![DenseLayer::new(vec![vec![5.0, 1.0]], vec![0.0])],
            Task::Regression,
        )
        .unwrap();
        let r = rank_features(&net, &[0.0, 0.0], 0.1, 0.01, &ReachOptions::default()).unwrap();
        assert_eq!(r[0].feature, 0);
        assert!((r[0].volume.unwrap() - 2.0 * 0.51).abs() < 1e-12);
        assert!((r[1].volume.unwrap() - 2.0 * 0.15).abs() < 1e-12);
    }

    #[test]
    fn bad_radii_rejected() {
        let net = Network::new(vec![DenseLayer::new(vec![vec![1.0]], vec![0.0])], Task::Regression)
            .unwrap();
        let opts = ReachOptions::default();
        assert!(rank_features(&net, &[0.0], 0.01, 0.1, &opts).is_err());
        assert!(rank_features(&net, &[0.0], 0.1, 0.0, &opts).is_err());
        assert!(rank_features(&net, &[0.0, 1.0], 0.1, 0.01, &opts).is_err());
    }
}
