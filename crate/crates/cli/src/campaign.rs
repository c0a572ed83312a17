//! Langevin validation campaign on a quadratic potential: simulated versus
//! analytic steady-state covariances, marginal total-variation distances,
//! probability current on a grid, the noiseless fixed point and the
//! `(m, γ, Δt) ↔ (ρ, α)` map.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sgnlab_core::langevin::{
    analytic_covariances, hyperparam_map, inverse_hyperparam_map, probability_current, simulate,
    simulate_with_observer, steady_state_density, LangevinConfig, PhaseState, QuadraticPotential, TrajectoryWriter,
};
use sgnlab_core::stats::std_normal_cdf;

use crate::config::LangevinSettings;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub simulated: Vec<Vec<f64>>,
    pub analytic: Vec<Vec<f64>>,
    /// Frobenius norm of the difference over that of the analytic matrix.
    pub relative_error: f64,
}

impl CovarianceCheck {
    fn new(sim: &DMatrix<f64>, exact: &DMatrix<f64>) -> Self {
        CovarianceCheck {
            simulated: rows(sim),
            analytic: rows(exact),
            relative_error: (sim - exact).norm() / exact.norm(),
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub coordinate: usize,
    /// `"theta"` or `"v"`.
    pub variable: String,
    pub analytic_std: f64,
    pub total_variation: f64,
    /// Mass of samples outside the ±5σ histogram window.
    pub outside: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentGrid {
    pub theta_range: (f64, f64),
    pub v_range: (f64, f64),
    pub points: usize,
    /// Smallest `|J_θ| / π` over the grid; the current never vanishes
    /// where the velocity does not.
    pub min_theta_ratio: f64,
    pub min_v_ratio: f64,
    pub min_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamCheck {
    pub mass: f64,
    pub friction: f64,
    pub dt: f64,
    pub momentum: f64,
    pub learning_rate: f64,
    pub mass_roundtrip: f64,
    pub friction_roundtrip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangevinReport {
    pub steps: usize,
    pub burn_in: usize,
    pub scheme: String,
    pub friction: f64,
    pub dt: f64,
    pub mean_theta: Vec<f64>,
    pub theta_mean_stderr: Vec<f64>,
    pub v_skewness: Vec<f64>,
    pub v_skewness_stderr: Vec<f64>,
    pub cov_theta: CovarianceCheck,
    pub cov_v: CovarianceCheck,
    pub marginals: Vec<MarginalCheck>,
    pub current: CurrentGrid,
    /// Largest displacement from the minimizer of a noiseless run started there.
    pub noiseless_drift: f64,
    pub hyperparams: HyperparamCheck,
}

pub fn potential(settings: &LangevinSettings) -> Result<QuadraticPotential> {
    let d = settings.hessian.len();
    if settings.hessian.iter().any(|r| r.len() != d) {
        return Err(CliError::Config("langevin.hessian must be square".into()));
    }
    let flat: Vec<f64> = settings.hessian.iter().flatten().copied().collect();
    let minimizer = settings.minimizer.clone().unwrap_or_else(|| vec![0.0; d]);
    Ok(QuadraticPotential::new(minimizer, DMatrix::from_row_slice(d, d, &flat))?)
}

struct Binned {
    lo: f64,
    width: f64,
    counts: Vec<u64>,
    outside: u64,
}

impl Binned {
    fn new(center: f64, sd: f64, bins: usize) -> Self {
        let lo = center - 5.0 * sd;
        Binned { lo, width: 10.0 * sd / bins as f64, counts: vec![0; bins], outside: 0 }
    }

    fn push(&mut self, x: f64) {
        let b = ((x - self.lo) / self.width).floor();
        if b >= 0.0 && (b as usize) < self.counts.len() {
            self.counts[b as usize] += 1;
        } else {
            self.outside += 1;
        }
    }

    /// Half the L1 distance between bin frequencies and N(center, sd²) bin masses.
    fn total_variation(&self, center: f64, sd: f64) -> f64 {
        let total = (self.counts.iter().sum::<u64>() + self.outside) as f64;
        let inside: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                let a = self.lo + b as f64 * self.width;
                let p = std_normal_cdf((a + self.width - center) / sd) - std_normal_cdf((a - center) / sd);
                (c as f64 / total - p).abs()
            })
            .sum();
        // mass outside ±5σ under the Gaussian is ~5.7e-7
        0.5 * (inside + self.outside as f64 / total + 2.0 * std_normal_cdf(-5.0))
    }
}

/// Runs the full campaign. When `trajectory` is given and the stride is
/// positive, every `stride`-th state is written to it as CSV.
pub fn run_campaign(settings: &LangevinSettings, trajectory: Option<&mut dyn Write>) -> Result<LangevinReport> {
    let pot = potential(settings)?;
    let (gamma, dt) = (settings.friction, settings.dt);
    if !(gamma > 0.0) {
        return Err(CliError::Config("langevin.friction must be positive".into()));
    }
    let d = pot.dim();
    let cfg = LangevinConfig::for_potential(gamma, dt, &pot)?.with_scheme(settings.scheme);
    let (ct, cv) = analytic_covariances(gamma, dt, &pot);
    let sd_theta: Vec<f64> = (0..d).map(|i| ct[(i, i)].sqrt()).collect();
    let sd_v: Vec<f64> = (0..d).map(|i| cv[(i, i)].sqrt()).collect();
    let center = pot.minimizer().to_vec();
    let mut theta_bins: Vec<Binned> = (0..d).map(|i| Binned::new(center[i], sd_theta[i], settings.tv_bins)).collect();
    let mut v_bins: Vec<Binned> = (0..d).map(|i| Binned::new(0.0, sd_v[i], settings.tv_bins)).collect();

    let mut writer = match trajectory {
        Some(w) if settings.trajectory_stride > 0 => Some(TrajectoryWriter::new(w, settings.trajectory_stride)),
        _ => None,
    };
    let mut io_error = None;
    let burn = settings.burn_in;
    let summary = simulate_with_observer(
        &cfg,
        &pot,
        &PhaseState::at_rest(center.clone()),
        settings.steps,
        burn,
        settings.seed,
        |step, s| {
            if step > burn {
                for i in 0..d {
                    theta_bins[i].push(s.theta[i]);
                    v_bins[i].push(s.v[i]);
                }
            }
            if let Some(w) = writer.as_mut() {
                if let Err(e) = w.record(step, s) {
                    io_error.get_or_insert(e);
                }
            }
        },
    )?;
    if let Some(e) = io_error {
        return Err(CliError::io("trajectory", e));
    }

    let mut marginals = Vec::new();
    for i in 0..d {
        for (name, bins, c, sd) in [("theta", &theta_bins[i], center[i], sd_theta[i]), ("v", &v_bins[i], 0.0, sd_v[i])] {
            let total = (bins.counts.iter().sum::<u64>() + bins.outside) as f64;
            marginals.push(MarginalCheck {
                coordinate: i,
                variable: name.into(),
                analytic_std: sd,
                total_variation: bins.total_variation(c, sd),
                outside: bins.outside as f64 / total,
            });
        }
    }

    Ok(LangevinReport {
        steps: summary.steps,
        burn_in: summary.burn_in,
        scheme: format!("{:?}", settings.scheme),
        friction: gamma,
        dt,
        cov_theta: CovarianceCheck::new(&summary.cov_theta_matrix(), &ct),
        cov_v: CovarianceCheck::new(&summary.cov_v_matrix(), &cv),
        mean_theta: summary.mean_theta,
        theta_mean_stderr: summary.theta_mean_stderr,
        v_skewness: summary.v_skewness,
        v_skewness_stderr: summary.v_skewness_stderr,
        marginals,
        current: current_grid(&pot, gamma, dt, settings.grid)?,
        noiseless_drift: noiseless_drift(&pot, gamma, dt)?,
        hyperparams: hyperparam_check(gamma, dt)?,
    })
}

/// `|J|/π` on a `points × points` grid in the (θ₁, v₁) plane, all other
/// coordinates held at the minimizer with zero velocity.
pub fn current_grid(pot: &QuadraticPotential, gamma: f64, dt: f64, points: usize) -> Result<CurrentGrid> {
    let (theta_range, v_range) = ((-0.3, 0.3), (0.1, 1.0));
    let diffusion = pot.hessian() * dt;
    let density = |t: &[f64], v: &[f64]| steady_state_density(t, v, gamma, dt, pot).unwrap_or(0.0);
    let step = |(a, b): (f64, f64), k: usize| if points > 1 { a + (b - a) * k as f64 / (points - 1) as f64 } else { a };
    let mut grid = CurrentGrid {
        theta_range,
        v_range,
        points,
        min_theta_ratio: f64::INFINITY,
        min_v_ratio: f64::INFINITY,
        min_density: f64::INFINITY,
    };
    let mut theta = pot.minimizer().to_vec();
    let mut v = vec![0.0; pot.dim()];
    for i in 0..points {
        for j in 0..points {
            theta[0] = pot.minimizer()[0] + step(theta_range, i);
            v[0] = step(v_range, j);
            let c = probability_current(&theta, &v, gamma, dt, pot, &diffusion, density)?;
            grid.min_density = grid.min_density.min(c.density);
            grid.min_theta_ratio = grid.min_theta_ratio.min(c.theta_norm() / c.density);
            grid.min_v_ratio = grid.min_v_ratio.min(c.v_norm() / c.density);
        }
    }
    Ok(grid)
}

fn noiseless_drift(pot: &QuadraticPotential, gamma: f64, dt: f64) -> Result<f64> {
    let cfg = LangevinConfig::deterministic(1.0, gamma, dt, pot.dim())?;
    let start = PhaseState::at_rest(pot.minimizer().to_vec());
    let s = simulate(&cfg, pot, &start, 10_000, 0, 0)?;
    Ok(s.final_state.theta.iter().zip(pot.minimizer()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn hyperparam_check(gamma: f64, dt: f64) -> Result<HyperparamCheck> {
    let hp = hyperparam_map(1.0, gamma, dt)?;
    let back = inverse_hyperparam_map(hp, dt)?;
    Ok(HyperparamCheck {
        mass: 1.0,
        friction: gamma,
        dt,
        momentum: hp.momentum,
        learning_rate: hp.learning_rate,
        mass_roundtrip: back.mass,
        friction_roundtrip: back.friction,
    })
}
