use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::net::{NetSpec, Params, Sample};
use crate::noise::GradientBank;

/// Largest coordinate subset for which a dense covariance is formed.
pub const MAX_DENSE_COORDS: usize = 64;

/// Empirical covariance `C(θ)` (normalized by N) of the per-sample gradients
/// over `dataset`, restricted to the flat parameter indices `coords`.
pub fn noise_covariance_at(params: &Params, spec: &NetSpec, dataset: &[Sample], coords: &[usize]) -> Result<DMatrix<f64>> {
    if coords.len() > MAX_DENSE_COORDS {
        return Err(Error::validation(format!(
            "{} coordinates requested, dense covariance supports at most {MAX_DENSE_COORDS}",
            coords.len()
        )));
    }
    let labels = coords
        .iter()
        .map(|&i| {
            if i < params.len() {
                Ok(params.label(i))
            } else {
                Err(Error::shape(format!("coordinate {i} out of range")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let bank = GradientBank::build(params, spec, dataset, labels)?;
    let c = coords.len();
    let n = bank.n_samples();
    let full = bank.full_gradient();
    let mut cov = DMatrix::zeros(c, c);
    for s in 0..n {
        let g = bank.sample_gradient(s);
        for i in 0..c {
            let di = g[i] - full[i];
            for j in 0..=i {
                cov[(i, j)] += di * (g[j] - full[j]);
            }
        }
    }
    for i in 0..c {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok(cov / n as f64)
}
