use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::NetSpec;
use crate::error::{Error, Result};

/// Flat parameter vector of a [`NetSpec`] network.
///
/// Layout per layer: weights row-major (`rows = width of layer k`,
/// `cols = width of layer k-1`), followed by the bias. Layers are stored in
/// order, so a flat index identifies a coordinate stably across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    shapes: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Human-readable identity of one flat parameter coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoordinateLabel {
    pub index: usize,
    /// 0-based layer index.
    pub layer: usize,
    pub kind: ParamKind,
    pub row: usize,
    /// Always 0 for biases.
    pub col: usize,
}

impl fmt::Display for CoordinateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ParamKind::Weight => write!(f, "L{}.W[{},{}]", self.layer + 1, self.row, self.col),
            ParamKind::Bias => write!(f, "L{}.b[{}]", self.layer + 1, self.row),
        }
    }
}

impl Params {
    pub fn zeros(spec: &NetSpec) -> Self {
        let shapes: Vec<_> = (0..spec.depth()).map(|k| spec.weight_shape(k)).collect();
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut at = 0;
        for &(r, c) in &shapes {
            offsets.push(at);
            at += r * c + r;
        }
        Params {
            shapes,
            offsets,
            data: vec![0.0; at],
        }
    }

    /// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for
    /// weights and biases.
    pub fn init_uniform(spec: &NetSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::zeros(spec);
        for k in 0..p.depth() {
            let (_, cols) = p.shapes[k];
            let bound = 1.0 / (cols as f64).sqrt();
            for w in p.layer_mut(k) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        p
    }

    pub fn from_flat(spec: &NetSpec, data: Vec<f64>) -> Result<Self> {
        let mut p = Params::zeros(spec);
        if data.len() != p.data.len() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                p.data.len(),
                data.len()
            )));
        }
        p.data = data;
        Ok(p)
    }

    /// Checks that the stored shapes agree with `spec`.
    pub fn matches(&self, spec: &NetSpec) -> bool {
        self.shapes.len() == spec.depth()
            && self.shapes.iter().enumerate().all(|(k, &s)| s == spec.weight_shape(k))
    }

    pub fn depth(&self) -> usize {
        self.shapes.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn weight_shape(&self, k: usize) -> (usize, usize) {
        self.shapes[k]
    }

    /// Flat range holding layer `k` (weights then bias).
    pub fn layer_range(&self, k: usize) -> std::ops::Range<usize> {
        let (r, c) = self.shapes[k];
        self.offsets[k]..self.offsets[k] + r * c + r
    }

    fn layer_mut(&mut self, k: usize) -> &mut [f64] {
        let range = self.layer_range(k);
        &mut self.data[range]
    }

    /// Row-major weight matrix of layer `k`.
    pub fn weight(&self, k: usize) -> &[f64] {
        let (r, c) = self.shapes[k];
        &self.data[self.offsets[k]..self.offsets[k] + r * c]
    }

    pub fn bias(&self, k: usize) -> &[f64] {
        let (r, c) = self.shapes[k];
        let start = self.offsets[k] + r * c;
        &self.data[start..start + r]
    }

    pub fn weight_mut(&mut self, k: usize) -> &mut [f64] {
        let (r, c) = self.shapes[k];
        let start = self.offsets[k];
        &mut self.data[start..start + r * c]
    }

    pub fn bias_mut(&mut self, k: usize) -> &mut [f64] {
        let (r, c) = self.shapes[k];
        let start = self.offsets[k] + r * c;
        &mut self.data[start..start + r]
    }

    pub fn flat_index(&self, layer: usize, kind: ParamKind, row: usize, col: usize) -> usize {
        let (_, c) = self.shapes[layer];
        match kind {
            ParamKind::Weight => self.offsets[layer] + row * c + col,
            ParamKind::Bias => self.offsets[layer] + self.shapes[layer].0 * c + row,
        }
    }

    /// Inverse of [`Params::flat_index`]. Panics when out of range.
    pub fn label(&self, index: usize) -> CoordinateLabel {
        assert!(index < self.data.len(), "coordinate {index} out of range");
        let layer = self.offsets.partition_point(|&o| o <= index) - 1;
        let (r, c) = self.shapes[layer];
        let local = index - self.offsets[layer];
        if local < r * c {
            CoordinateLabel {
                index,
                layer,
                kind: ParamKind::Weight,
                row: local / c,
                col: local % c,
            }
        } else {
            CoordinateLabel {
                index,
                layer,
                kind: ParamKind::Bias,
                row: local - r * c,
                col: 0,
            }
        }
    }

    /// SHA-256 of the little-endian parameter bytes, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for &(r, c) in &self.shapes {
            h.update((r as u64).to_le_bytes());
            h.update((c as u64).to_le_bytes());
        }
        for x in &self.data {
            h.update(x.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Gradient in the flat [`Params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
