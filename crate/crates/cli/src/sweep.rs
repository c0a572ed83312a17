//! Per-layer sweeps at a frozen checkpoint: Shapiro-Wilk Gaussianity versus
//! batch size, distributions of the standardized third absolute moment, and
//! tail indices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sgnlab_core::net::{NetSpec, Params, Sample};
use sgnlab_core::noise::{select_coordinates, GradientBank, NoiseSampleSet, ProbeConfig};
use sgnlab_core::stats::{
    berry_esseen_bound, classify_gaussian_with, histogram, moment_summary, quantile_sorted, tail_index, Classification,
    Histogram, SwOptions,
};
use sgnlab_core::Error;

use crate::config::{ProbeSettings, StatsSettings};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianityRow {
    /// 1-based layer number.
    pub layer: usize,
    pub batch_size: usize,
    pub checkpoint_epoch: usize,
    pub tested: usize,
    pub gaussian: usize,
    pub dirac: usize,
    pub non_gaussian: usize,
    /// `100 · (gaussian + dirac) / tested`.
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub checkpoint_epoch: usize,
    pub params_fingerprint: String,
    pub n_draws: usize,
    pub alpha_level: f64,
    pub rows: Vec<GaussianityRow>,
}

impl GaussianityReport {
    pub fn percentage(&self, layer: usize, batch_size: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.layer == layer && r.batch_size == batch_size).map(|r| r.percentage)
    }

    pub fn layers(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.rows.iter().map(|r| r.layer).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}

/// Per-sample gradients at the probed coordinates of a checkpoint.
pub fn build_bank(spec: &NetSpec, params: &Params, data: &[Sample], probe: &ProbeSettings) -> Result<GradientBank> {
    let coords = select_coordinates(params, probe.max_coords_per_layer, probe.include_bias, probe.seed);
    Ok(GradientBank::build(params, spec, data, coords)?)
}

pub fn probe_config(probe: &ProbeSettings, batch_size: usize) -> ProbeConfig {
    ProbeConfig {
        batch_size,
        n_draws: probe.n_draws,
        max_coords_per_layer: probe.max_coords_per_layer,
        sampling: probe.sampling,
        include_bias: probe.include_bias,
        seed: probe.seed,
    }
}

/// Classifies every row of `set`, in row order.
pub fn classify_rows(set: &NoiseSampleSet, stats: &StatsSettings, seed: u64) -> Result<Vec<Classification>> {
    let opts = SwOptions { alpha_level: stats.alpha_level, max_n: stats.sw_max_n, seed };
    Ok((0..set.n_coords())
        .into_par_iter()
        .map(|i| classify_gaussian_with(set.row(i), &opts))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Per-layer verdict counts for one noise sample set.
pub fn tally(set: &NoiseSampleSet, verdicts: &[Classification], checkpoint_epoch: usize) -> Vec<GaussianityRow> {
    set.layers()
        .into_iter()
        .map(|layer| {
            let rows = set.layer_rows(layer);
            let count = |c: Classification| rows.iter().filter(|&&i| verdicts[i] == c).count();
            let (gaussian, dirac, non_gaussian) =
                (count(Classification::Gaussian), count(Classification::Dirac), count(Classification::NonGaussian));
            let tested = rows.len();
            GaussianityRow {
                layer: layer + 1,
                batch_size: set.batch_size,
                checkpoint_epoch,
                tested,
                gaussian,
                dirac,
                non_gaussian,
                percentage: 100.0 * (gaussian + dirac) as f64 / tested as f64,
            }
        })
        .collect()
}

/// Gaussianity percentage of every layer at every configured batch size.
pub fn gaussianity_sweep(
    bank: &GradientBank,
    probe: &ProbeSettings,
    stats: &StatsSettings,
    checkpoint_epoch: usize,
    params_fingerprint: &str,
) -> Result<GaussianityReport> {
    let mut rows = Vec::new();
    for &b in &probe.batch_sizes {
        let set = bank.sample_noise(&probe_config(probe, b))?;
        let verdicts = classify_rows(&set, stats, probe.seed)?;
        rows.extend(tally(&set, &verdicts, checkpoint_epoch));
    }
    // stable: batch sizes stay in configured order within a layer
    rows.sort_by_key(|r| r.layer);
    Ok(GaussianityReport {
        checkpoint_epoch,
        params_fingerprint: params_fingerprint.to_string(),
        n_draws: probe.n_draws,
        alpha_level: stats.alpha_level,
        rows,
    })
}

/// Empirical distribution of one per-coordinate quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueDistribution {
    pub count: usize,
    pub histogram: Histogram,
    /// `(probability, value)` pairs, ascending in both.
    pub quantiles: Vec<(f64, f64)>,
    pub median: Option<f64>,
}

impl ValueDistribution {
    fn from_values(mut values: Vec<f64>, probs: &[f64], bins: usize) -> Self {
        values.sort_by(f64::total_cmp);
        let quantiles = probs.iter().filter_map(|&p| quantile_sorted(&values, p).map(|q| (p, q))).collect();
        let histogram = match (values.first(), values.last()) {
            (Some(&lo), Some(&hi)) => {
                // β/σ³ and the kurtosis bound are both at least 1
                let lo = lo.min(1.0);
                let hi = if hi > lo { hi } else { lo + 1.0 };
                histogram(&values, lo, hi, bins)
            }
            _ => Histogram { edges: Vec::new(), counts: Vec::new() },
        };
        ValueDistribution { count: values.len(), histogram, quantiles, median: quantile_sorted(&values, 0.5) }
    }
}

/// Value of the β/σ³ and kurtosis-bound distributions at the quantile level
/// equal to the layer's Gaussianity fraction at one batch size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSpine {
    pub batch_size: usize,
    pub gaussian_percentage: f64,
    pub beta_ratio: Option<f64>,
    pub kurtosis_bound: Option<f64>,
    /// Berry-Esseen bound `median(β/σ³) · A₀ / √batch_size`.
    pub berry_esseen_at_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBounds {
    pub layer: usize,
    pub tested: usize,
    /// Coordinates whose summands are a point mass (no ratio defined).
    pub dirac: usize,
    pub beta_ratio: ValueDistribution,
    pub kurtosis_bound: ValueDistribution,
    pub spines: Vec<QuantileSpine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub checkpoint_epoch: usize,
    /// What the moments were computed from.
    pub source: String,
    pub layers: Vec<LayerBounds>,
}

impl BoundReport {
    pub fn median_beta_ratio(&self, layer: usize) -> Option<f64> {
        self.layers.iter().find(|l| l.layer == layer).and_then(|l| l.beta_ratio.median)
    }
}

/// Moment distributions per layer of the rows of `set`. Spines are taken at
/// the Gaussianity percentages in `gaussianity` (if any).
pub fn layer_bounds(set: &NoiseSampleSet, stats: &StatsSettings, gaussianity: Option<&GaussianityReport>) -> Result<Vec<LayerBounds>> {
    let summaries = (0..set.n_coords())
        .into_par_iter()
        .map(|i| moment_summary(set.row(i)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for layer in set.layers() {
        let rows = set.layer_rows(layer);
        let mut beta = Vec::new();
        let mut kurt = Vec::new();
        for &i in &rows {
            if let (Some(b), Some(k)) = (summaries[i].beta_ratio, summaries[i].kurtosis_bound) {
                beta.push(b);
                kurt.push(k);
            }
        }
        let dirac = rows.len() - beta.len();
        let beta_ratio = ValueDistribution::from_values(beta.clone(), &stats.quantiles, stats.histogram_bins);
        let kurtosis_bound = ValueDistribution::from_values(kurt.clone(), &stats.quantiles, stats.histogram_bins);
        beta.sort_by(f64::total_cmp);
        kurt.sort_by(f64::total_cmp);
        let spines = gaussianity
            .map(|g| {
                g.rows
                    .iter()
                    .filter(|r| r.layer == layer + 1)
                    .map(|r| {
                        let p = r.percentage / 100.0;
                        QuantileSpine {
                            batch_size: r.batch_size,
                            gaussian_percentage: r.percentage,
                            beta_ratio: quantile_sorted(&beta, p),
                            kurtosis_bound: quantile_sorted(&kurt, p),
                            berry_esseen_at_median: beta_ratio.median.map(|m| {
                                m * sgnlab_core::stats::BERRY_ESSEEN_A0 / (r.batch_size as f64).sqrt()
                            }),
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();
        out.push(LayerBounds { layer: layer + 1, tested: rows.len(), dirac, beta_ratio, kurtosis_bound, spines });
    }
    Ok(out)
}

/// Moment distributions of the per-sample noise `g_s − φ(θ)`: the i.i.d.
/// summands whose batch means are the gradient noise, and whose β/σ³ sets
/// the Berry-Esseen rate.
pub fn bound_sweep(bank: &GradientBank, stats: &StatsSettings, gaussianity: &GaussianityReport) -> Result<BoundReport> {
    let set = bank.summand_noise();
    Ok(BoundReport {
        checkpoint_epoch: gaussianity.checkpoint_epoch,
        source: "per_sample_summands".into(),
        layers: layer_bounds(&set, stats, Some(gaussianity))?,
    })
}

/// Consistency check used by reports: the kurtosis bound dominates β/σ³ at
/// every coordinate.
pub fn bound_ordering_holds(set: &NoiseSampleSet) -> Result<bool> {
    for i in 0..set.n_coords() {
        let s = moment_summary(set.row(i))?;
        if let Ok(b) = berry_esseen_bound(&s, 1) {
            if b.beta_variant > b.kurtosis_variant * (1.0 + 1e-12) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub layer: usize,
    pub batch_size: usize,
    pub coordinates: usize,
    /// Rows whose quantile spread vanished (no estimate).
    pub skipped: usize,
    pub median_alpha: Option<f64>,
    pub q25_alpha: Option<f64>,
    pub q75_alpha: Option<f64>,
    /// Share of estimated coordinates with α < 1.9.
    pub heavy_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub checkpoint_epoch: usize,
    pub method: String,
    pub n_draws: usize,
    pub rows: Vec<TailRow>,
}

/// α-stable tail index of every probed coordinate, summarized per layer and
/// batch size.
pub fn tail_index_sweep(bank: &GradientBank, probe: &ProbeSettings, checkpoint_epoch: usize) -> Result<TailReport> {
    if probe.n_draws < 100 {
        return Err(Error::Validation(format!("tail index needs n_draws >= 100, got {}", probe.n_draws)).into());
    }
    let mut rows = Vec::new();
    for &b in &probe.batch_sizes {
        let set = bank.sample_noise(&probe_config(probe, b))?;
        let alphas: Vec<Option<f64>> = (0..set.n_coords())
            .into_par_iter()
            .map(|i| tail_index(set.row(i)).ok().map(|e| e.alpha))
            .collect();
        for layer in set.layers() {
            let idx = set.layer_rows(layer);
            let mut a: Vec<f64> = idx.iter().filter_map(|&i| alphas[i]).collect();
            a.sort_by(f64::total_cmp);
            let heavy = a.iter().filter(|&&x| x < 1.9).count();
            rows.push(TailRow {
                layer: layer + 1,
                batch_size: b,
                coordinates: idx.len(),
                skipped: idx.len() - a.len(),
                median_alpha: quantile_sorted(&a, 0.5),
                q25_alpha: quantile_sorted(&a, 0.25),
                q75_alpha: quantile_sorted(&a, 0.75),
                heavy_fraction: (!a.is_empty()).then(|| heavy as f64 / a.len() as f64),
            });
        }
    }
    rows.sort_by_key(|r| (r.layer, r.batch_size));
    Ok(TailReport {
        checkpoint_epoch,
        method: sgnlab_core::stats::TAIL_INDEX_METHOD.into(),
        n_draws: probe.n_draws,
        rows,
    })
}

/// Copy of `set` with every draw replaced by an independent ±1. Its
/// moments are known exactly (β/σ³ = 1), which makes it a check on the
/// bound pipeline.
pub fn rademacher_injection(set: &NoiseSampleSet, seed: u64) -> NoiseSampleSet {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = set.clone();
    for x in &mut out.draws {
        *x = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    out
}
