//! Shapiro-Wilk W test following Royston's AS R94 algorithm
//! (valid for 3 <= n <= 5000).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normal::{std_normal_cdf, std_normal_quantile};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA_LEVEL: f64 = 0.05;
const MAX_N: usize = 5000;

/// Verdict for one sample. `Dirac` samples count as Gaussian when
/// aggregating percentages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Gaussian,
    Dirac,
    NonGaussian,
}

impl Classification {
    pub fn counts_as_gaussian(self) -> bool {
        !matches!(self, Classification::NonGaussian)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwResult {
    /// `None` for point-mass samples.
    pub w: Option<f64>,
    pub p_value: Option<f64>,
    pub classification: Classification,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwOptions {
    pub alpha_level: f64,
    /// Larger samples are subsampled uniformly to this size.
    pub max_n: usize,
    pub seed: u64,
}

impl Default for SwOptions {
    fn default() -> Self {
        SwOptions {
            alpha_level: DEFAULT_ALPHA_LEVEL,
            max_n: 2000,
            seed: 0,
        }
    }
}

/// Degenerate-range rule: `max - min <= 1e-12 * max(1, max |x|)`.
pub fn is_point_mass(sample: &[f64]) -> bool {
    let (lo, hi, amax) = sample.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, 0.0f64),
        |(lo, hi, a), &x| (lo.min(x), hi.max(x), a.max(x.abs())),
    );
    hi - lo <= 1e-12 * amax.max(1.0)
}

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Coefficients a_1..a_{n/2} (a_1 pairs with the extremes).
fn coefficients(n: usize) -> Vec<f64> {
    let nn2 = n / 2;
    if n == 3 {
        return vec![FRAC_1_SQRT_2];
    }
    let an = n as f64;
    let an25 = an + 0.25;
    let m: Vec<f64> = (1..=nn2)
        .map(|i| std_normal_quantile((i as f64 - 0.375) / an25))
        .collect();
    let summ2 = 2.0 * m.iter().map(|x| x * x).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; nn2];
    let first_scaled;
    let fac;
    if n > 5 {
        first_scaled = 2;
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        a[1] = a2;
    } else {
        first_scaled = 1;
        fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
    }
    a[0] = a1;
    for i in first_scaled..nn2 {
        a[i] = -m[i] / fac;
    }
    a
}

/// W and its p-value for a sorted, non-degenerate sample.
fn swilk(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let nn2 = n / 2;
    let a = coefficients(n);
    let coef = |k: usize| {
        if k < nn2 {
            -a[k]
        } else if k >= n - nn2 {
            a[n - 1 - k]
        } else {
            0.0
        }
    };

    // W as the squared correlation between coefficients and range-scaled data
    let range = x[n - 1] - x[0];
    let an = n as f64;
    let sa = (0..n).map(coef).sum::<f64>() / an;
    let sx = x.iter().map(|v| v / range).sum::<f64>() / an;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (k, &xk) in x.iter().enumerate() {
        let asa = coef(k) - sa;
        let xsx = xk / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    let ssassx = (ssa * ssx).sqrt();
    // 1 - W, kept separate to avoid rounding when W is close to 1
    let w1 = ((ssassx - sax) * (ssassx + sax) / (ssa * ssx)).max(0.0);
    let w = 1.0 - w1;

    if n == 3 {
        let p = 6.0 / PI * (w.sqrt().asin() - PI / 3.0);
        return (w, p.clamp(0.0, 1.0));
    }
    let mut y = w1.ln();
    let lxx = an.ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return (w, 1e-99);
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        (poly(&C5, lxx), poly(&C6, lxx).exp())
    };
    // upper tail
    let p = std_normal_cdf(-(y - m) / s);
    (w, p.clamp(0.0, 1.0))
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.len() < 3 || sample.len() > MAX_N {
        return Err(Error::validation(format!(
            "Shapiro-Wilk needs 3 <= n <= {MAX_N}, got n = {}",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("sample contains non-finite values"));
    }
    Ok(())
}

/// Shapiro-Wilk test at the default 0.05 level.
pub fn shapiro_wilk(sample: &[f64]) -> Result<SwResult> {
    shapiro_wilk_at_level(sample, DEFAULT_ALPHA_LEVEL)
}

pub fn shapiro_wilk_at_level(sample: &[f64], alpha_level: f64) -> Result<SwResult> {
    check_sample(sample)?;
    let n = sample.len();
    if is_point_mass(sample) {
        return Ok(SwResult {
            w: None,
            p_value: None,
            classification: Classification::Dirac,
            n,
        });
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let (w, p) = swilk(&x);
    let classification = if p > alpha_level {
        Classification::Gaussian
    } else {
        Classification::NonGaussian
    };
    Ok(SwResult {
        w: Some(w),
        p_value: Some(p),
        classification,
        n,
    })
}

/// Gaussian / Dirac / non-Gaussian verdict with the default options and
/// the given significance level.
pub fn classify_gaussian(sample: &[f64], alpha_level: f64) -> Result<Classification> {
    classify_gaussian_with(
        sample,
        &SwOptions {
            alpha_level,
            ..SwOptions::default()
        },
    )
}

pub fn classify_gaussian_with(sample: &[f64], opts: &SwOptions) -> Result<Classification> {
    if sample.len() < 3 {
        return Err(Error::validation(format!("need at least 3 values, got {}", sample.len())));
    }
    if is_point_mass(sample) && sample.iter().all(|x| x.is_finite()) {
        return Ok(Classification::Dirac);
    }
    let cap = opts.max_n.clamp(3, MAX_N);
    if sample.len() > cap {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut idx = index::sample(&mut rng, sample.len(), cap).into_vec();
        idx.sort_unstable();
        let sub: Vec<f64> = idx.into_iter().map(|i| sample[i]).collect();
        return Ok(shapiro_wilk_at_level(&sub, opts.alpha_level)?.classification);
    }
    Ok(shapiro_wilk_at_level(sample, opts.alpha_level)?.classification)
}
