//! Dense feed-forward ReLU networks and their JSON model format.
//!
//! ```json
//! {"name": "iris", "task": "classification",
//!  "layers": [{"weights": [[...], ...], "bias": [...]}, ...]}
//! ```
//!
//! Weights are row-major `out × in`. ReLU is applied between layers but not
//! after the last one.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zonotope::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Classification,
    Regression,
    Autoencoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Self {
        Self { weights, bias }
    }

    pub fn in_width(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn out_width(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub task: Task,
    layers: Vec<DenseLayer>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, task: Task) -> Result<Self> {
        let net = Self {
            name: None,
            task,
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width()
    }

    /// Checks that widths chain, every row has the same length, and all
    /// entries are finite.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::ModelValidation {
                layer: 0,
                message: "network has no layers".into(),
            });
        }
        let mut expected_in: Option<usize> = None;
        for (k, layer) in self.layers.iter().enumerate() {
            let invalid = |message: String| Error::ModelValidation { layer: k, message };
            if layer.weights.is_empty() {
                return Err(invalid("weight matrix has no rows".into()));
            }
            let cols = layer.in_width();
            if cols == 0 {
                return Err(invalid("weight matrix has no columns".into()));
            }
            if let Some(r) = layer.weights.iter().position(|row| row.len() != cols) {
                return Err(invalid(format!(
                    "weight row {r} has {} columns, expected {cols}",
                    layer.weights[r].len()
                )));
            }
            if layer.bias.len() != layer.out_width() {
                return Err(invalid(format!(
                    "bias has length {}, expected {}",
                    layer.bias.len(),
                    layer.out_width()
                )));
            }
            if let Some(prev) = expected_in {
                if cols != prev {
                    return Err(invalid(format!(
                        "input width {cols} does not match previous layer output width {prev}"
                    )));
                }
            }
            if layer
                .weights
                .iter()
                .flatten()
                .chain(&layer.bias)
                .any(|v| !v.is_finite())
            {
                return Err(invalid("non-finite weight or bias".into()));
            }
            expected_in = Some(layer.out_width());
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let net: Network = serde_path_to_error::deserialize(de).map_err(|e| Error::ModelParse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        net.validate()?;
        Ok(net)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_reader(reader);
        let net: Network = serde_path_to_error::deserialize(de).map_err(|e| Error::ModelParse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    /// Exact forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_width() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_width(),
                found: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut act = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            act = layer.apply(&act);
            if k < last {
                act.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(act)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_identity_layer() {
        let net =
            Network::from_json_str(r#"{"layers":[{"weights":[[1]],"bias":[0]}]}"#).unwrap();
        assert_eq!(net.input_width(), 1);
        assert_eq!(net.output_width(), 1);
        assert_eq!(net.task, Task::Classification);
        assert_eq!(net.forward(&[3.7]).unwrap(), vec![3.7]);
    }

    #[test]
    fn relu_between_layers_only() {
        let net = Network::new(
            vec![
                DenseLayer::new(vec![vec![-1.0]], vec![0.0]),
                DenseLayer::new(vec![vec![1.0]], vec![5.0]),
            ],
            Task::Regression,
        )
        .unwrap();
        assert_eq!(net.forward(&[2.0]).unwrap(), vec![5.0]);
        // No ReLU after the last layer.
        let neg = Network::new(
            vec![DenseLayer::new(vec![vec![1.0]], vec![-4.0])],
            Task::Regression,
        )
        .unwrap();
        assert_eq!(neg.forward(&[1.0]).unwrap(), vec![-3.0]);
    }

    #[test]
    fn mismatched_widths_rejected() {
        let text = r#"{"task":"classification","layers":[
            {"weights":[[1,0],[0,1],[1,1]],"bias":[0,0,0]},
            {"weights":[[1,1]],"bias":[0]}]}"#;
        match Network::from_json_str(text) {
            Err(Error::ModelValidation { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_and_bias_rejected() {
        let ragged = r#"{"layers":[{"weights":[[1,0],[1]],"bias":[0,0]}]}"#;
        assert!(matches!(
            Network::from_json_str(ragged),
            Err(Error::ModelValidation { layer: 0, .. })
        ));
        let bias = r#"{"layers":[{"weights":[[1,0]],"bias":[0,0]}]}"#;
        assert!(Network::from_json_str(bias).is_err());
        assert!(Network::from_json_str(r#"{"layers":[]}"#).is_err());
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = Network::from_json_str(
            r#"{"task":"classification","layers":[{"weights":[[1]],"bias":["x"]}]}"#,
        )
        .unwrap_err();
        match err {
            Error::ModelParse { path, .. } => assert!(path.contains("layers[0].bias"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
        let err = Network::from_json_str(r#"{"task":"ranking","layers":[]}"#).unwrap_err();
        assert!(matches!(err, Error::ModelParse { .. }));
        assert!(Network::from_json_str(r#"{"layers":[{"weights":[[NaN]],"bias":[0]}]}"#).is_err());
        assert!(
            Network::from_json_str(r#"{"layers":[{"weights":[[1e999]],"bias":[0]}]}"#).is_err()
        );
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let weights = vec![
            vec![0.1, -1.0 / 3.0, 2.0f64.sqrt()],
            vec![1e-300, 6.02214076e23, -0.0],
        ];
        let net = Network::new(
            vec![DenseLayer::new(weights, vec![std::f64::consts::PI, -7.5e-9])],
            Task::Autoencoder,
        )
        .unwrap()
        .with_name("rt");
        let back = Network::from_json_str(&net.to_json_string().unwrap()).unwrap();
        for (a, b) in net.layers()[0]
            .weights
            .iter()
            .flatten()
            .zip(back.layers()[0].weights.iter().flatten())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(net, back);
    }

    #[test]
    fn forward_checks_input_width() {
        let net =
            Network::from_json_str(r#"{"layers":[{"weights":[[1, 2]],"bias":[0]}]}"#).unwrap();
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0]), 0);
    }
}
