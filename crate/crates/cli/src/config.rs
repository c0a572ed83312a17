//! Experiment configuration, read from TOML.
//!
//! ```toml
//! output_dir = "out"
//!
//! [net]
//! layer_sizes = [32, 64, 64, 64, 10]
//! activations = ["relu", "relu", "relu", "identity"]
//! loss = "cross_entropy"
//!
//! [dataset]
//! kind = "synthetic"          # or "idx" / "csv"
//! classes = 10
//! dim = 32
//! n = 2048
//! separation = 2.0
//! seed = 7
//!
//! [train]
//! epochs = 10
//! learning_rate = 0.05
//! lr_drop_epoch = 8
//! momentum = 0.9
//! batch_size = 64
//! weight_decay = 5e-4
//! seed = 1
//!
//! [probe]
//! checkpoint_epochs = [2]
//! batch_sizes = [16, 64, 256, 512]
//! n_draws = 200
//! max_coords_per_layer = 256
//! seed = 3
//! ```
//!
//! `[stats]` and `[langevin]` are optional; see [`StatsSettings`] and
//! [`LangevinSettings`] for their defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgnlab_core::langevin::Scheme;
use sgnlab_core::net::NetSpec;
use sgnlab_core::noise::Sampling;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub net: NetSpec,
    pub dataset: DatasetSource,
    pub train: TrainSchedule,
    pub probe: ProbeSettings,
    #[serde(default)]
    pub stats: StatsSettings,
    #[serde(default)]
    pub langevin: LangevinSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// IDX image and label files (MNIST layout).
    Idx {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only the first `limit` samples.
        #[serde(default)]
        limit: Option<usize>,
    },
    /// Header row plus one row per sample; the class index sits in the
    /// column named `label`, every other column is a feature.
    Csv { path: PathBuf },
    /// Isotropic Gaussian clusters, one per class.
    Synthetic {
        classes: usize,
        dim: usize,
        n: usize,
        separation: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Epochs after this one use `learning_rate * lr_drop_factor`.
    #[serde(default)]
    pub lr_drop_epoch: Option<usize>,
    #[serde(default = "default_drop_factor")]
    pub lr_drop_factor: f64,
    pub momentum: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub weight_decay: f64,
    pub seed: u64,
}

fn default_drop_factor() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    /// Epoch 0 is the initialization.
    pub checkpoint_epochs: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub n_draws: usize,
    pub max_coords_per_layer: usize,
    #[serde(default = "default_sampling")]
    pub sampling: Sampling,
    #[serde(default)]
    pub include_bias: bool,
    pub seed: u64,
}

fn default_sampling() -> Sampling {
    Sampling::WithoutReplacement
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSettings {
    pub alpha_level: f64,
    /// Rows longer than this are subsampled before the Shapiro-Wilk test.
    pub sw_max_n: usize,
    pub histogram_bins: usize,
    pub quantiles: Vec<f64>,
}

impl Default for StatsSettings {
    fn default() -> Self {
        StatsSettings {
            alpha_level: 0.05,
            sw_max_n: 2000,
            histogram_bins: 40,
            quantiles: vec![0.05, 0.25, 0.5, 0.75, 0.95],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LangevinSettings {
    pub friction: f64,
    pub dt: f64,
    /// Row-major Hessian at the minimum; also the gradient-noise covariance.
    pub hessian: Vec<Vec<f64>>,
    /// Defaults to the origin.
    pub minimizer: Option<Vec<f64>>,
    pub steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Points per axis of the probability-current grid.
    pub grid: usize,
    pub tv_bins: usize,
    /// Write every n-th state to a trajectory CSV; 0 disables it.
    pub trajectory_stride: usize,
}

impl Default for LangevinSettings {
    fn default() -> Self {
        LangevinSettings {
            friction: 1.0,
            dt: 0.01,
            hessian: vec![vec![1.0, 0.0], vec![0.0, 4.0]],
            minimizer: None,
            steps: 1_000_000,
            burn_in: 100_000,
            seed: 0,
            scheme: Scheme::EulerMaruyama,
            grid: 21,
            tv_bins: 200,
            trajectory_stride: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative dataset paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.dataset.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CliError::Config(m));
        let t = &self.train;
        if t.epochs == 0 || t.batch_size == 0 {
            return fail("train.epochs and train.batch_size must be positive".into());
        }
        if !(t.learning_rate >= 0.0 && t.learning_rate.is_finite()) || !(0.0..1.0).contains(&t.momentum) {
            return fail("train.learning_rate must be >= 0 and train.momentum in [0, 1)".into());
        }
        if !(t.weight_decay >= 0.0) || !(t.lr_drop_factor > 0.0) {
            return fail("train.weight_decay must be >= 0 and train.lr_drop_factor > 0".into());
        }
        let p = &self.probe;
        if p.batch_sizes.is_empty() || p.batch_sizes.contains(&0) {
            return fail("probe.batch_sizes must be non-empty and positive".into());
        }
        if p.n_draws < 3 || p.max_coords_per_layer == 0 {
            return fail("probe.n_draws must be at least 3 and probe.max_coords_per_layer positive".into());
        }
        if let Some(&e) = p.checkpoint_epochs.iter().find(|&&e| e > t.epochs) {
            return fail(format!("checkpoint epoch {e} exceeds train.epochs = {}", t.epochs));
        }
        let s = &self.stats;
        if !(s.alpha_level > 0.0 && s.alpha_level < 1.0) || s.sw_max_n < 3 || s.histogram_bins == 0 {
            return fail("stats.alpha_level must lie in (0, 1), stats.sw_max_n >= 3, stats.histogram_bins > 0".into());
        }
        if s.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return fail("stats.quantiles must lie in [0, 1]".into());
        }
        if let DatasetSource::Synthetic { classes, dim, n, .. } = self.dataset {
            if classes == 0 || dim == 0 || n == 0 {
                return fail("synthetic dataset needs positive classes, dim and n".into());
            }
        }
        let l = &self.langevin;
        if l.hessian.is_empty() || l.hessian.iter().any(|r| r.len() != l.hessian.len()) {
            return fail("langevin.hessian must be a non-empty square matrix".into());
        }
        if l.steps <= l.burn_in || l.grid < 2 || l.tv_bins == 0 {
            return fail("langevin.steps must exceed burn_in; grid >= 2; tv_bins > 0".into());
        }
        Ok(())
    }

    /// Replaces every seed in the configuration.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self.probe.seed = seed;
        self.langevin.seed = seed;
        if let DatasetSource::Synthetic { seed: s, .. } = &mut self.dataset {
            *s = seed;
        }
        self
    }

    /// All seeds, keyed by section.
    pub fn seeds(&self) -> Vec<(&'static str, u64)> {
        let mut out = vec![("train", self.train.seed), ("probe", self.probe.seed), ("langevin", self.langevin.seed)];
        if let DatasetSource::Synthetic { seed, .. } = self.dataset {
            out.push(("dataset", seed));
        }
        out
    }

    /// SHA-256 of the canonical (sorted-key) JSON form, output directory
    /// excluded. Field order in the source file does not matter.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config is serializable");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output_dir");
        }
        let canonical = serde_json::to_string(&value).expect("value is serializable");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl DatasetSource {
    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        match self {
            DatasetSource::Idx { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DatasetSource::Csv { path } => fix(path),
            DatasetSource::Synthetic { .. } => {}
        }
    }
}
