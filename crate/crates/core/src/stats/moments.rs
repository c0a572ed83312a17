use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Universal constant of the Berry-Esseen inequality (Shevtsova's bound).
pub const BERRY_ESSEEN_A0: f64 = 0.4748;

/// Central moments of a (weighted) sample.
///
/// With `z = (x - mean) / std`, `beta_ratio = E|z|^3` (the standardized third
/// absolute moment β/σ³), `kurt_term = var[z^2]` and
/// `kurtosis_bound = sqrt(var[z^2] + 1)`. By Cauchy-Schwarz
/// `beta_ratio <= kurtosis_bound` holds exactly for the empirical moments.
/// The ratio fields are `None` for point-mass samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
    /// E|x - mean|^3
    pub beta: f64,
    pub beta_ratio: Option<f64>,
    pub kurt_term: Option<f64>,
    pub kurtosis_bound: Option<f64>,
}

impl MomentSummary {
    /// Moments of the distribution putting mass `weights[i]` on `values[i]`.
    pub fn from_weighted(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::shape("values and weights differ in length"));
        }
        if values.iter().chain(weights).any(|x| !x.is_finite()) {
            return Err(Error::validation("non-finite value or weight"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::validation("negative weight"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::validation("weights sum to zero"));
        }
        let expect = |f: &dyn Fn(f64) -> f64| {
            let mut acc = NeumaierSum::new();
            for (&x, &w) in values.iter().zip(weights) {
                acc.add(w * f(x));
            }
            acc.value() / total
        };
        let mean = expect(&|x| x);
        let variance = expect(&|x| (x - mean) * (x - mean));
        let std = variance.sqrt();
        let beta = expect(&|x| (x - mean).abs().powi(3));

        let support: Vec<f64> = values
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&x, _)| x)
            .collect();
        let degenerate = variance <= 0.0 || super::shapiro::is_point_mass(&support);
        let (beta_ratio, kurt_term, kurtosis_bound) = if degenerate {
            (None, None, None)
        } else {
            let z2_mean = expect(&|x| {
                let z = (x - mean) / std;
                z * z
            });
            let kurt = expect(&|x| {
                let z = (x - mean) / std;
                let d = z * z - z2_mean;
                d * d
            });
            let ratio = expect(&|x| ((x - mean) / std).abs().powi(3));
            (Some(ratio), Some(kurt), Some((kurt + 1.0).sqrt()))
        };
        Ok(MomentSummary {
            n: values.len(),
            mean,
            variance,
            std,
            beta,
            beta_ratio,
            kurt_term,
            kurtosis_bound,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.beta_ratio.is_none()
    }
}

/// Empirical moments of a sample (equal weights, population normalisation).
pub fn moment_summary(sample: &[f64]) -> Result<MomentSummary> {
    if sample.len() < 2 {
        return Err(Error::validation("moment summary needs at least 2 values"));
    }
    MomentSummary::from_weighted(sample, &vec![1.0; sample.len()])
}

/// Right-hand sides of the Berry-Esseen inequality for a batch of size n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenBound {
    /// (β/σ³) · A₀ / √n
    pub beta_variant: f64,
    /// sqrt(var[z²] + 1) · A₀ / √n, never smaller than `beta_variant`
    pub kurtosis_variant: f64,
}

pub fn berry_esseen_bound(summary: &MomentSummary, batch_size: usize) -> Result<BerryEsseenBound> {
    if batch_size == 0 {
        return Err(Error::validation("batch size must be positive"));
    }
    let (Some(ratio), Some(kb)) = (summary.beta_ratio, summary.kurtosis_bound) else {
        return Err(Error::Undefined("Berry-Esseen bound of a point-mass distribution".into()));
    };
    let scale = BERRY_ESSEEN_A0 / (batch_size as f64).sqrt();
    Ok(BerryEsseenBound {
        beta_variant: ratio * scale,
        kurtosis_variant: kb * scale,
    })
}
