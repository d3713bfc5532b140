use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NnError;
use crate::autodiff::{Array, AutodiffError, NodeId, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: NodeId) -> Result<NodeId, AutodiffError> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => crate::autodiff::sigmoid(x),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(format!("unknown activation `{other}` (expected identity, tanh or sigmoid)")),
        }
    }
}

/// Layer layout of a dense network.
///
/// `layer_widths` lists the input width first and the output width last, so
/// `[1, 5, 5, 5, 1]` has four weight layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub layer_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    /// Multiplies the network output after the output activation.
    pub output_scale: f64,
}

impl MlpConfig {
    pub fn new(layer_widths: Vec<usize>, hidden: Activation, output: Activation) -> Self {
        Self {
            layer_widths,
            hidden_activation: hidden,
            output_activation: output,
            output_scale: 1.0,
        }
    }

    pub fn with_output_scale(mut self, scale: f64) -> Self {
        self.output_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_widths.len() < 2 || self.layer_widths.contains(&0) {
            return Err(NnError::InvalidConfig(format!(
                "layer widths {:?} need at least two entries, all positive",
                self.layer_widths
            )));
        }
        if !self.output_scale.is_finite() || self.output_scale == 0.0 {
            return Err(NnError::InvalidConfig(format!(
                "output scale must be finite and nonzero, got {}",
                self.output_scale
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`.
    pub weight: Array,
    pub bias: Array,
}

/// Weights and biases of a dense network together with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub config: MlpConfig,
    pub layers: Vec<DenseLayer>,
}

impl MlpParams {
    /// Glorot-uniform weights and zero biases, deterministic in `seed`.
    pub fn init(config: &MlpConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layer_widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..=limit))
                    .collect();
                DenseLayer {
                    weight: Array::new(vec![fan_out, fan_in], weights).expect("consistent shape"),
                    bias: Array::zeros(&[fan_out]),
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    pub fn zeros(config: &MlpConfig) -> Result<Self, NnError> {
        config.validate()?;
        let layers = config
            .layer_widths
            .windows(2)
            .map(|w| DenseLayer {
                weight: Array::zeros(&[w[1], w[0]]),
                bias: Array::zeros(&[w[1]]),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameter tensors in a fixed order: weight then bias, layer by layer.
    pub fn tensors(&self) -> impl Iterator<Item = &Array> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Array> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn tensor_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("layer{i}.weight"), format!("layer{i}.bias")])
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors().flat_map(|t| t.values().iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(Array::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors().fold(0.0, |m, t| m.max(t.max_abs()))
    }

    /// Records every parameter tensor as a tape leaf.
    pub fn register(&self, tape: &mut Tape) -> MlpNodes {
        MlpNodes {
            config: self.config.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
                .collect(),
        }
    }

    /// Plain evaluation on a batch of row vectors without a tape.
    pub fn eval(&self, batch: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        batch
            .iter()
            .map(|x| {
                let mut h = x.clone();
                for (i, layer) in self.layers.iter().enumerate() {
                    let (rows, cols) = (layer.weight.shape()[0], layer.weight.shape()[1]);
                    let w = layer.weight.values();
                    let act = if i == last {
                        self.config.output_activation
                    } else {
                        self.config.hidden_activation
                    };
                    h = (0..rows)
                        .map(|r| {
                            let z: f64 =
                                (0..cols).map(|c| w[r * cols + c] * h[c]).sum::<f64>() + layer.bias.values()[r];
                            act.eval(z)
                        })
                        .collect();
                }
                if self.config.output_scale != 1.0 {
                    for v in &mut h {
                        *v *= self.config.output_scale;
                    }
                }
                h
            })
            .collect()
    }
}

/// A network whose parameters live on a tape.
#[derive(Debug, Clone)]
pub struct MlpNodes {
    pub config: MlpConfig,
    pub layers: Vec<(NodeId, NodeId)>,
}

impl MlpNodes {
    pub fn ids(&self) -> Vec<NodeId> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    /// Forward pass on a `[batch, in]` node, returning `[batch, out]`.
    pub fn forward(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId, NnError> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 2 || shape[1] != self.config.input_width() || shape[0] == 0 {
            return Err(NnError::InputWidth {
                expected: self.config.input_width(),
                shape,
            });
        }
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let wt = tape.transpose(w)?;
            let z = tape.matmul(h, wt)?;
            let z = tape.broadcast_add(z, b)?;
            let act = if i == last {
                self.config.output_activation
            } else {
                self.config.hidden_activation
            };
            h = act.apply(tape, z)?;
        }
        if self.config.output_scale != 1.0 {
            h = tape.scalar_mul(h, self.config.output_scale)?;
        }
        Ok(h)
    }

    /// Collects per-tensor gradients into an `MlpParams`-shaped container.
    pub fn gradients(&self, tape: &mut Tape, output: NodeId) -> Result<MlpParams, NnError> {
        let values = tape.gradient_values(output, &self.ids())?;
        let mut it = values.into_iter();
        let layers = self
            .layers
            .iter()
            .map(|_| DenseLayer {
                weight: it.next().expect("one gradient per tensor"),
                bias: it.next().expect("one gradient per tensor"),
            })
            .collect();
        Ok(MlpParams {
            config: self.config.clone(),
            layers,
        })
    }
}
