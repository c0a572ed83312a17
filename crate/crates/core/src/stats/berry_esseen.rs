//! Exact distance between the law of a standardized i.i.d. sum and the
//! standard normal, for small discrete summand distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::moments::MomentSummary;
use super::normal::std_normal_cdf;
use crate::error::{Error, Result};

const MAX_SUPPORT: usize = 20;
const MAX_BATCH: usize = 20;
/// Atom budget for the enumerated law of the sum.
pub const MAX_ENUMERATED_ATOMS: usize = 2_000_000;

/// Finite distribution with at most 20 atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    /// Probabilities must be non-negative and sum to 1 within 1e-9; they are
    /// renormalised exactly.
    pub fn new(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::validation("need equally many values and probabilities, at least one"));
        }
        if values.iter().chain(probs).any(|x| !x.is_finite()) || probs.iter().any(|&p| p < 0.0) {
            return Err(Error::validation("values must be finite and probabilities non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("probabilities sum to {total}")));
        }
        let atoms = merge(
            values
                .iter()
                .zip(probs)
                .filter(|(_, &p)| p > 0.0)
                .map(|(&v, &p)| (v, p / total))
                .collect(),
        );
        Ok(DiscreteDistribution { atoms })
    }

    pub fn rademacher() -> Self {
        Self::new(&[-1.0, 1.0], &[0.5, 0.5]).unwrap()
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::validation("Bernoulli p must lie in [0, 1]"));
        }
        Self::new(&[0.0, 1.0], &[1.0 - p, p])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn moment_summary(&self) -> Result<MomentSummary> {
        let (v, p): (Vec<f64>, Vec<f64>) = self.atoms.iter().copied().unzip();
        MomentSummary::from_weighted(&v, &p)
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.atoms.last().unwrap().0
    }
}

/// Sorts atoms and merges values that agree to ~1e-12 relative.
fn merge(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (v, p) in atoms {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() <= 1e-12 * (1.0 + v.abs().max(last.0.abs())) => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    out
}

fn standardization(dist: &DiscreteDistribution) -> Result<(f64, f64)> {
    let m = dist.moment_summary()?;
    if m.is_degenerate() {
        return Err(Error::Undefined("summand distribution has zero variance".into()));
    }
    Ok((m.mean, m.std))
}

/// `sup_x |F_n(x) - Φ(x)|` where `F_n` is the CDF of
/// `Σ_{s=1..n} (X_s - μ) / (σ √n)` for i.i.d. `X_s ~ dist`.
///
/// Since `F_n` is a step function and Φ is increasing, the supremum is
/// attained at an atom, from the left or the right. Enumeration is exact
/// up to floating-point merging of coincident atoms.
pub fn sup_cdf_distance(dist: &DiscreteDistribution, batch_size: usize) -> Result<f64> {
    if dist.atoms.len() > MAX_SUPPORT {
        return Err(Error::validation(
            "support larger than 20 atoms; use sup_cdf_distance_monte_carlo",
        ));
    }
    if batch_size == 0 || batch_size > MAX_BATCH {
        return Err(Error::validation(
            "exact enumeration supports 1 <= n <= 20; use sup_cdf_distance_monte_carlo",
        ));
    }
    let (mu, sigma) = standardization(dist)?;
    let centred: Vec<(f64, f64)> = dist.atoms.iter().map(|&(v, p)| (v - mu, p)).collect();
    let mut law = vec![(0.0, 1.0)];
    for _ in 0..batch_size {
        if law.len() * centred.len() > MAX_ENUMERATED_ATOMS {
            return Err(Error::validation(
                "enumerated sum has too many atoms; use sup_cdf_distance_monte_carlo",
            ));
        }
        let mut next = Vec::with_capacity(law.len() * centred.len());
        for &(s, ps) in &law {
            for &(v, pv) in &centred {
                next.push((s + v, ps * pv));
            }
        }
        law = merge(next);
    }
    let scale = sigma * (batch_size as f64).sqrt();
    let mut below = 0.0;
    let mut sup: f64 = 0.0;
    for (s, p) in law {
        let phi = std_normal_cdf(s / scale);
        sup = sup.max((below - phi).abs());
        below += p;
        sup = sup.max((below.min(1.0) - phi).abs());
    }
    Ok(sup)
}

/// Kolmogorov distance between `trials` simulated standardized sums and Φ.
/// For summand laws or batch sizes beyond the exact enumeration regime.
pub fn sup_cdf_distance_monte_carlo(
    dist: &DiscreteDistribution,
    batch_size: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if batch_size == 0 || trials == 0 {
        return Err(Error::validation("batch size and trial count must be positive"));
    }
    let (mu, sigma) = standardization(dist)?;
    let scale = sigma * (batch_size as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums: Vec<f64> = (0..trials)
        .map(|_| (0..batch_size).map(|_| dist.sample(&mut rng) - mu).sum::<f64>() / scale)
        .collect();
    sums.sort_by(f64::total_cmp);
    let n = trials as f64;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < sums.len() {
        let mut j = i;
        while j + 1 < sums.len() && sums[j + 1] == sums[i] {
            j += 1;
        }
        let phi = std_normal_cdf(sums[i]);
        sup = sup.max((i as f64 / n - phi).abs()).max(((j + 1) as f64 / n - phi).abs());
        i = j + 1;
    }
    Ok(sup)
}
