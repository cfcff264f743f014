//! Input sets around a data point: cube, box, PCA-shaped box, and the
//! coupled "free" perturbation.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zonotope::Zonotope;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum InputShape {
    /// `(x | ε I)`, the L∞ ball.
    Cube { eps: f64 },
    /// `(x | diag(radii))`.
    Box { radii: Vec<f64> },
    /// Box aligned with the principal axes' interval hull, rescaled to the
    /// cube's scaled volume for `eps`.
    BoxPca { eps: f64 },
    /// `(x | [δ I, ε·1])`: all features shift together by up to `eps`, plus
    /// an independent `delta` per feature.
    Free { eps: f64, delta: f64 },
}

impl InputShape {
    /// Checks the strict invariants (`eps > 0`, `delta ≥ 0`, `radii > 0`).
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            InputShape::Cube { eps } | InputShape::BoxPca { eps } => positive("eps", *eps),
            InputShape::Box { radii } => radii.iter().try_for_each(|r| positive("radius", *r)),
            InputShape::Free { eps, delta } => {
                positive("eps", *eps)?;
                if delta.is_finite() && *delta >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "delta must be nonnegative, got {delta}"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub shape: InputShape,
    pub anchor: Vec<f64>,
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")))
    }
}

/// Expands `spec` into an input zonotope centered at the anchor.
///
/// A zero `eps` is accepted here and yields a degenerate set (used for point
/// checks); [`InputShape::validate`] rejects it.
pub fn build_input_set(spec: &InputSpec, dataset: Option<&[Vec<f64>]>) -> Result<Zonotope> {
    let dim = spec.anchor.len();
    let anchor = spec.anchor.clone();
    match &spec.shape {
        InputShape::Cube { eps } => {
            nonnegative("eps", *eps)?;
            if *eps == 0.0 {
                return Zonotope::point(anchor);
            }
            Zonotope::axis_box(anchor, &vec![*eps; dim])
        }
        InputShape::Box { radii } => {
            radii.iter().try_for_each(|r| nonnegative("radius", *r))?;
            Zonotope::axis_box(anchor, radii)
        }
        InputShape::Free { eps, delta } => {
            nonnegative("eps", *eps)?;
            nonnegative("delta", *delta)?;
            let mut generators: Vec<Vec<f64>> = (0..dim)
                .map(|d| {
                    let mut g = vec![0.0; dim];
                    g[d] = *delta;
                    g
                })
                .collect();
            generators.push(vec![*eps; dim]);
            Zonotope::new(anchor, generators)
        }
        InputShape::BoxPca { eps } => {
            nonnegative("eps", *eps)?;
            let data = dataset.ok_or_else(|| {
                Error::InvalidArgument("box-pca input sets need a dataset".into())
            })?;
            let radii = pca_box_radii(data, *eps)?;
            if radii.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "box-pca dataset width",
                    expected: dim,
                    found: radii.len(),
                });
            }
            Zonotope::axis_box(anchor, &radii)
        }
    }
}

/// Eigenpairs of the sample covariance, ordered by descending eigenvalue,
/// each eigenvector signed so its first nonzero component is positive.
pub fn principal_axes(data: &[Vec<f64>]) -> Result<Vec<(f64, Vec<f64>)>> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(
            "principal axes need at least two points".into(),
        ));
    }
    let dim = data[0].len();
    if dim == 0 || data.iter().any(|row| row.len() != dim) {
        return Err(Error::Dataset("rows have differing widths".into()));
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for row in data {
        for i in 0..dim {
            let di = row[i] - mean[i];
            for j in 0..dim {
                cov[(i, j)] += di * (row[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..dim)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(pairs)
}

/// Radii of the PCA box: interval hull of `(0 | {√λ_k v_k})`, rescaled so
/// that `(Π 2 r_d)^{1/D} = 2 eps`.
pub fn pca_box_radii(data: &[Vec<f64>], eps: f64) -> Result<Vec<f64>> {
    let axes = principal_axes(data)?;
    let dim = axes.len();
    let mut radii = vec![0.0; dim];
    for (lambda, v) in &axes {
        let scale = lambda.max(0.0).sqrt();
        for (r, x) in radii.iter_mut().zip(v) {
            *r += scale * x.abs();
        }
    }
    if radii.iter().all(|r| *r == 0.0) {
        return Err(Error::DegenerateCovariance("covariance has rank 0".into()));
    }
    if let Some(d) = radii.iter().position(|r| *r <= 1e-300) {
        return Err(Error::DegenerateCovariance(format!(
            "no variance along feature {d}"
        )));
    }
    let log_mean = radii.iter().map(|r| r.ln()).sum::<f64>() / dim as f64;
    let factor = eps / log_mean.exp();
    Ok(radii.into_iter().map(|r| r * factor).collect())
}
