//! Dense feed-forward networks with exact per-sample backpropagation.
//!
//! Layer `k` (1-based in labels, 0-based in code) computes
//! `u = W a_prev + b` and `a = f(u)`. Parameters are stored flat in
//! layer-major order: the row-major weight matrix of a layer, then its bias.

mod activation;
mod backprop;
mod params;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use activation::Activation;
pub use backprop::{
    accuracy, batch_gradient, batch_loss_and_gradient, forward, loss_and_gradient, mean_loss, output_gradient,
    per_sample_gradient, per_sample_loss, ForwardTrace,
};
pub use params::{CoordinateLabel, Gradient, ParamKind, Params};

/// Per-sample loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `||y - a||^2`
    Mse,
    /// Softmax cross-entropy on the network output treated as logits.
    CrossEntropy,
}

/// Architecture of a dense network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetSpec", into = "RawNetSpec")]
pub struct NetSpec {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    loss: LossKind,
}

#[derive(Serialize, Deserialize)]
struct RawNetSpec {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    loss: LossKind,
}

impl TryFrom<RawNetSpec> for NetSpec {
    type Error = Error;
    fn try_from(raw: RawNetSpec) -> Result<Self> {
        NetSpec::new(raw.layer_sizes, raw.activations, raw.loss)
    }
}

impl From<NetSpec> for RawNetSpec {
    fn from(spec: NetSpec) -> Self {
        RawNetSpec {
            layer_sizes: spec.layer_sizes,
            activations: spec.activations,
            loss: spec.loss,
        }
    }
}

impl NetSpec {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>, loss: LossKind) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::validation("a network needs at least an input and an output size"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::validation("layer sizes must be positive"));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(Error::validation(format!(
                "{} layers need {} activations, got {}",
                layer_sizes.len() - 1,
                layer_sizes.len() - 1,
                activations.len()
            )));
        }
        if loss == LossKind::CrossEntropy && *layer_sizes.last().unwrap() < 2 {
            return Err(Error::validation("cross-entropy needs at least 2 output classes"));
        }
        Ok(NetSpec {
            layer_sizes,
            activations,
            loss,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    /// Number of learnable layers K.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// `(rows, cols)` of the weight matrix of layer `k`.
    pub fn weight_shape(&self, k: usize) -> (usize, usize) {
        (self.layer_sizes[k + 1], self.layer_sizes[k])
    }

    /// Total parameter count d.
    pub fn param_count(&self) -> usize {
        (0..self.depth())
            .map(|k| {
                let (r, c) = self.weight_shape(k);
                r * c + r
            })
            .sum()
    }
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Sample {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Sample { input, target }
    }
}
