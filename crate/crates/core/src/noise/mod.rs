//! Stochastic gradient noise at a frozen parameter snapshot.
//!
//! The reference ("expected") gradient is the full-dataset gradient, i.e.
//! the expectation under the empirical distribution. A noise draw is
//! `batch_gradient(B) - full_gradient` for an independently drawn batch B.

mod io;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{self, CoordinateLabel, Gradient, NetSpec, ParamKind, Params, Sample};
use crate::sum::VecSum;

pub use io::{decode_binary, encode_binary, write_csv, NoiseBinary, BINARY_MAGIC, BINARY_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Samples inside one batch may repeat.
    WithReplacement,
    /// Each batch is a uniformly random subset.
    WithoutReplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub batch_size: usize,
    pub n_draws: usize,
    pub max_coords_per_layer: usize,
    pub sampling: Sampling,
    /// Probe bias coordinates as well as weights.
    #[serde(default)]
    pub include_bias: bool,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            batch_size: 64,
            n_draws: 200,
            max_coords_per_layer: 4096,
            sampling: Sampling::WithoutReplacement,
            include_bias: false,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.batch_size == 0 || self.n_draws == 0 || self.max_coords_per_layer == 0 {
            return Err(Error::validation(
                "batch_size, n_draws and max_coords_per_layer must be positive",
            ));
        }
        if self.sampling == Sampling::WithoutReplacement && self.batch_size > dataset_len {
            return Err(Error::validation(format!(
                "batch size {} exceeds dataset size {dataset_len} when sampling without replacement",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Noise draws for a set of coordinates: row `i` holds every draw of
/// coordinate `coordinates[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSampleSet {
    pub coordinates: Vec<CoordinateLabel>,
    /// Row-major, `coordinates.len() x n_draws`.
    pub draws: Vec<f64>,
    pub n_draws: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// [`Params::fingerprint`] of the snapshot the noise was drawn at.
    pub params_fingerprint: String,
}

impl NoiseSampleSet {
    pub fn n_coords(&self) -> usize {
        self.coordinates.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.draws[i * self.n_draws..(i + 1) * self.n_draws]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&CoordinateLabel, &[f64])> {
        self.coordinates.iter().zip(self.draws.chunks_exact(self.n_draws.max(1)))
    }

    /// Column `j`: one draw across all coordinates.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_coords()).map(|i| self.draws[i * self.n_draws + j]).collect()
    }

    /// Row indices belonging to `layer`.
    pub fn layer_rows(&self, layer: usize) -> Vec<usize> {
        self.coordinates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.layer == layer)
            .map(|(i, _)| i)
            .collect()
    }

    /// Distinct layers present, ascending.
    pub fn layers(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.coordinates.iter().map(|c| c.layer).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}

/// φ(θ): mean per-sample gradient over the whole dataset.
pub fn full_gradient(params: &Params, spec: &NetSpec, dataset: &[Sample]) -> Result<Gradient> {
    if dataset.is_empty() {
        return Err(Error::validation("dataset must not be empty"));
    }
    net::batch_gradient(params, spec, dataset)
}

/// Uniformly chooses at most `max_per_layer` coordinates per layer,
/// returned in ascending flat order.
pub fn select_coordinates(
    params: &Params,
    max_per_layer: usize,
    include_bias: bool,
    seed: u64,
) -> Vec<CoordinateLabel> {
    let mut out = Vec::new();
    for k in 0..params.depth() {
        let range = params.layer_range(k);
        let (rows, cols) = params.weight_shape(k);
        let candidates: Vec<usize> = if include_bias {
            range.collect()
        } else {
            (range.start..range.start + rows * cols).collect()
        };
        let mut chosen: Vec<usize> = if candidates.len() <= max_per_layer {
            candidates
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636f_6f72_6473_u64);
            rng.set_stream(k as u64);
            index::sample(&mut rng, candidates.len(), max_per_layer)
                .into_iter()
                .map(|i| candidates[i])
                .collect()
        };
        chosen.sort_unstable();
        out.extend(chosen.into_iter().map(|i| params.label(i)));
    }
    out
}

/// Per-sample gradients of every dataset sample, restricted to a coordinate
/// subset, plus their mean. Built once per snapshot and reused for every
/// batch size of a sweep.
#[derive(Debug, Clone)]
pub struct GradientBank {
    coordinates: Vec<CoordinateLabel>,
    /// Sample-major, `n_samples x coordinates.len()`.
    per_sample: Vec<f64>,
    full: Vec<f64>,
    n_samples: usize,
    fingerprint: String,
}

impl GradientBank {
    pub fn build(
        params: &Params,
        spec: &NetSpec,
        dataset: &[Sample],
        coordinates: Vec<CoordinateLabel>,
    ) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::validation("dataset must not be empty"));
        }
        if let Some(c) = coordinates.iter().find(|c| c.index >= params.len()) {
            return Err(Error::shape(format!("coordinate {} out of range", c.index)));
        }
        let idx: Vec<usize> = coordinates.iter().map(|c| c.index).collect();
        let rows: Vec<Vec<f64>> = dataset
            .par_iter()
            .map(|s| {
                let g = net::per_sample_gradient(params, spec, &s.input, &s.target)?;
                Ok(idx.iter().map(|&i| g.0[i]).collect())
            })
            .collect::<Result<_>>()?;
        let c = idx.len();
        let mut per_sample = Vec::with_capacity(rows.len() * c);
        let mut acc = VecSum::zeros(c);
        for r in &rows {
            per_sample.extend_from_slice(r);
            acc.add(r);
        }
        Ok(GradientBank {
            coordinates,
            per_sample,
            full: acc.mean().expect("non-empty dataset"),
            n_samples: dataset.len(),
            fingerprint: params.fingerprint(),
        })
    }

    pub fn coordinates(&self) -> &[CoordinateLabel] {
        &self.coordinates
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Restricted full-dataset gradient.
    pub fn full_gradient(&self) -> &[f64] {
        &self.full
    }

    /// Restricted gradient of sample `s`.
    pub fn sample_gradient(&self, s: usize) -> &[f64] {
        let c = self.coordinates.len();
        &self.per_sample[s * c..(s + 1) * c]
    }

    fn draw_batch(&self, cfg: &ProbeConfig, draw: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(draw as u64 + 1);
        let mut batch: Vec<usize> = match cfg.sampling {
            Sampling::WithoutReplacement => index::sample(&mut rng, self.n_samples, cfg.batch_size).into_vec(),
            Sampling::WithReplacement => (0..cfg.batch_size)
                .map(|_| rng.random_range(0..self.n_samples))
                .collect(),
        };
        // ascending order: a full-size batch then reproduces the full gradient bit for bit
        batch.sort_unstable();
        batch
    }

    /// Mini-batch gradient minus full gradient for `n_draws` i.i.d. batches.
    /// Draw `j` uses its own RNG stream, so the result does not depend on
    /// the number of worker threads.
    pub fn sample_noise(&self, cfg: &ProbeConfig) -> Result<NoiseSampleSet> {
        cfg.validate(self.n_samples)?;
        let c = self.coordinates.len();
        let columns: Vec<Vec<f64>> = (0..cfg.n_draws)
            .into_par_iter()
            .map(|j| {
                let batch = self.draw_batch(cfg, j);
                let mut acc = VecSum::zeros(c);
                for &s in &batch {
                    acc.add(self.sample_gradient(s));
                }
                let mean = acc.mean().expect("non-empty batch");
                mean.iter().zip(&self.full).map(|(m, f)| m - f).collect()
            })
            .collect();
        Ok(self.assemble(columns, cfg.batch_size, cfg.seed))
    }

    /// The summands themselves: column `s` is `g_s - full_gradient`, one per
    /// dataset sample. This is the exact empirical distribution of the
    /// per-sample noise whose batch means form [`GradientBank::sample_noise`].
    pub fn summand_noise(&self) -> NoiseSampleSet {
        let columns: Vec<Vec<f64>> = (0..self.n_samples)
            .map(|s| {
                self.sample_gradient(s)
                    .iter()
                    .zip(&self.full)
                    .map(|(g, f)| g - f)
                    .collect()
            })
            .collect();
        self.assemble(columns, 1, 0)
    }

    fn assemble(&self, columns: Vec<Vec<f64>>, batch_size: usize, seed: u64) -> NoiseSampleSet {
        let c = self.coordinates.len();
        let n = columns.len();
        let mut draws = vec![0.0; c * n];
        for (j, col) in columns.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                draws[i * n + j] = x;
            }
        }
        NoiseSampleSet {
            coordinates: self.coordinates.clone(),
            draws,
            n_draws: n,
            batch_size,
            seed,
            params_fingerprint: self.fingerprint.clone(),
        }
    }
}

/// Draws gradient noise at a frozen snapshot (see [`GradientBank`]).
pub fn sample_noise(
    params: &Params,
    spec: &NetSpec,
    dataset: &[Sample],
    cfg: &ProbeConfig,
) -> Result<NoiseSampleSet> {
    cfg.validate(dataset.len())?;
    let coords = select_coordinates(params, cfg.max_coords_per_layer, cfg.include_bias, cfg.seed);
    GradientBank::build(params, spec, dataset, coords)?.sample_noise(cfg)
}

/// Labels of all weight (and optionally bias) coordinates of `layer`.
pub fn layer_coordinates(params: &Params, layer: usize, include_bias: bool) -> Vec<CoordinateLabel> {
    params
        .layer_range(layer)
        .map(|i| params.label(i))
        .filter(|l| include_bias || l.kind == ParamKind::Weight)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, LossKind};

    fn setup(n: usize) -> (NetSpec, Params, Vec<Sample>) {
        let spec = NetSpec::new(
            vec![3, 5, 2],
            vec![Activation::Tanh, Activation::Identity],
            LossKind::CrossEntropy,
        )
        .unwrap();
        let params = Params::init_uniform(&spec, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                let t = if i % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
                Sample::new(x, t)
            })
            .collect();
        (spec, params, data)
    }

    #[test]
    fn full_gradient_of_single_sample() {
        let (spec, p, data) = setup(1);
        let g = net::per_sample_gradient(&p, &spec, &data[0].input, &data[0].target).unwrap();
        assert_eq!(full_gradient(&p, &spec, &data).unwrap(), g);
        assert!(full_gradient(&p, &spec, &[]).is_err());
    }

    #[test]
    fn full_gradient_equals_whole_batch() {
        let (spec, p, data) = setup(40);
        assert_eq!(
            full_gradient(&p, &spec, &data).unwrap(),
            net::batch_gradient(&p, &spec, &data).unwrap()
        );
    }

    #[test]
    fn full_size_batch_gives_exact_zero() {
        let (spec, p, data) = setup(30);
        let cfg = ProbeConfig {
            batch_size: 30,
            n_draws: 8,
            ..ProbeConfig::default()
        };
        let set = sample_noise(&p, &spec, &data, &cfg).unwrap();
        assert!(set.draws.iter().all(|&x| x == 0.0));
        assert_eq!(set.n_coords(), 3 * 5 + 5 * 2);
    }

    #[test]
    fn two_sample_enumeration() {
        let (spec, p, data) = setup(2);
        let g1 = net::per_sample_gradient(&p, &spec, &data[0].input, &data[0].target).unwrap();
        let g2 = net::per_sample_gradient(&p, &spec, &data[1].input, &data[1].target).unwrap();
        let cfg = ProbeConfig {
            batch_size: 1,
            n_draws: 50,
            include_bias: true,
            ..ProbeConfig::default()
        };
        let set = sample_noise(&p, &spec, &data, &cfg).unwrap();
        let mut seen = [false; 2];
        for (label, row) in set.rows() {
            let i = label.index;
            let plus = (g1.0[i] - g2.0[i]) / 2.0;
            for &x in row {
                let hit1 = (x - plus).abs() <= 1e-15 * plus.abs().max(1e-300);
                let hit2 = (x + plus).abs() <= 1e-15 * plus.abs().max(1e-300);
                assert!(hit1 || hit2, "{label}: {x} vs ±{plus}");
            }
        }
        for j in 0..set.n_draws {
            let col = set.column(j);
            let i = set.coordinates.iter().position(|c| c.index == 0).unwrap();
            let plus = (g1.0[0] - g2.0[0]) / 2.0;
            seen[usize::from((col[i] - plus).abs() > 1e-12)] = true;
        }
        assert!(seen[0] && seen[1], "both batches should occur in 50 draws");
    }

    #[test]
    fn config_validation() {
        let (spec, p, data) = setup(4);
        let bad = ProbeConfig {
            batch_size: 5,
            ..ProbeConfig::default()
        };
        assert!(matches!(sample_noise(&p, &spec, &data, &bad), Err(Error::Validation(_))));
        let ok = ProbeConfig {
            sampling: Sampling::WithReplacement,
            ..bad.clone()
        };
        assert!(sample_noise(&p, &spec, &data, &ok).is_ok());
        let zero = ProbeConfig {
            n_draws: 0,
            ..ProbeConfig::default()
        };
        assert!(sample_noise(&p, &spec, &data, &zero).is_err());
    }

    #[test]
    fn coordinate_cap_and_determinism() {
        let (spec, p, data) = setup(20);
        let cfg = ProbeConfig {
            batch_size: 4,
            n_draws: 16,
            max_coords_per_layer: 4,
            seed: 77,
            ..ProbeConfig::default()
        };
        let a = sample_noise(&p, &spec, &data, &cfg).unwrap();
        let b = sample_noise(&p, &spec, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layer_rows(0).len(), 4);
        assert_eq!(a.layer_rows(1).len(), 4);
        assert!(a.coordinates.windows(2).all(|w| w[0].index < w[1].index));
        assert!(a.coordinates.iter().all(|c| c.kind == ParamKind::Weight));
        assert_eq!(a.layers(), vec![0, 1]);
    }

    #[test]
    fn summands_average_to_zero() {
        let (spec, p, data) = setup(37);
        let coords = layer_coordinates(&p, 0, true);
        let bank = GradientBank::build(&p, &spec, &data, coords).unwrap();
        let set = bank.summand_noise();
        assert_eq!(set.n_draws, 37);
        for (_, row) in set.rows() {
            let mean = crate::sum::sum(row) / row.len() as f64;
            assert!(mean.abs() < 1e-12);
        }
    }
}
