use std::io::{self, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Integrator, LangevinConfig, PhaseState, QuadraticPotential};
use crate::error::{Error, Result};

/// A trajectory is declared divergent once `‖θ‖` exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e8;
const N_BATCHES: usize = 50;

/// Streaming mean and scatter matrix (Welford), mergeable across
/// independent chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamingMoments {
    count: u64,
    mean: Vec<f64>,
    /// Row-major `d x d` sum of outer products of deviations.
    m2: Vec<f64>,
    delta: Vec<f64>,
}

impl StreamingMoments {
    pub fn new(dim: usize) -> Self {
        StreamingMoments { count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim * dim], delta: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim();
        self.count += 1;
        let n = self.count as f64;
        for i in 0..d {
            self.delta[i] = x[i] - self.mean[i];
            self.mean[i] += self.delta[i] / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.m2[i * d + j] += self.delta[j] * after;
            }
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &StreamingMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = (0..d).map(|i| other.mean[i] - self.mean[i]).collect();
        for i in 0..d {
            for j in 0..d {
                self.m2[i * d + j] += other.m2[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..d {
            self.mean[i] += delta[i] * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population covariance (divides by the count).
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let n = (self.count as f64).max(1.0);
        DMatrix::from_row_slice(d, d, &self.m2).map(|x| x / n)
    }
}

/// Per-component running second and third central moments.
#[derive(Debug, Clone)]
struct MarginalCubic {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    m3: Vec<f64>,
}

impl MarginalCubic {
    fn new(dim: usize) -> Self {
        MarginalCubic { n: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim], m3: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        let n1 = self.n;
        self.n += 1.0;
        let n = self.n;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            let dn = delta / n;
            let t1 = delta * dn * n1;
            self.mean[i] += dn;
            self.m3[i] += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2[i];
            self.m2[i] += t1;
        }
    }

    fn skewness(&self) -> Vec<f64> {
        (0..self.mean.len())
            .map(|i| {
                if self.m2[i] <= 0.0 {
                    0.0
                } else {
                    self.n.sqrt() * self.m3[i] / self.m2[i].powf(1.5)
                }
            })
            .collect()
    }
}

/// Post-burn-in statistics of a simulated trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub steps: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub mean_theta: Vec<f64>,
    pub mean_v: Vec<f64>,
    /// Row-major.
    pub cov_theta: Vec<f64>,
    pub cov_v: Vec<f64>,
    /// Batch-means standard error of each θ component's mean.
    pub theta_mean_stderr: Vec<f64>,
    pub v_skewness: Vec<f64>,
    /// Batch-means standard error of each v component's skewness.
    pub v_skewness_stderr: Vec<f64>,
    pub final_state: PhaseState,
}

impl SimulationSummary {
    pub fn dim(&self) -> usize {
        self.mean_theta.len()
    }

    pub fn cov_theta_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.cov_theta)
    }

    pub fn cov_v_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.cov_v)
    }
}

impl LangevinConfig {
    /// Unit mass with `D = Δt·H*`, i.e. gradient-noise covariance equal to
    /// the Hessian at the minimum.
    pub fn for_potential(friction: f64, dt: f64, pot: &QuadraticPotential) -> Result<Self> {
        Self::from_noise_covariance(1.0, friction, dt, pot.hessian())
    }
}

fn batch_stderr(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    if b < 2.0 {
        return f64::NAN;
    }
    let m = values.iter().sum::<f64>() / b;
    let var = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Runs `steps` integrator steps on the quadratic potential from `initial`
/// and summarizes the states after `burn_in`.
pub fn simulate(
    cfg: &LangevinConfig,
    pot: &QuadraticPotential,
    initial: &PhaseState,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    simulate_with_observer(cfg, pot, initial, steps, burn_in, seed, |_, _| {})
}

/// As [`simulate`], calling `observer(step, state)` after every step
/// (steps numbered from 1, burn-in included).
pub fn simulate_with_observer<O>(
    cfg: &LangevinConfig,
    pot: &QuadraticPotential,
    initial: &PhaseState,
    steps: usize,
    burn_in: usize,
    seed: u64,
    mut observer: O,
) -> Result<SimulationSummary>
where
    O: FnMut(usize, &PhaseState),
{
    let d = pot.dim();
    if cfg.dim() != d || initial.dim() != d {
        return Err(Error::shape(format!(
            "config has dimension {}, potential {d}, initial state {}",
            cfg.dim(),
            initial.dim()
        )));
    }
    if steps <= burn_in {
        return Err(Error::validation(format!("steps ({steps}) must exceed burn-in ({burn_in})")));
    }
    let samples = steps - burn_in;
    let n_batches = N_BATCHES.min(samples);
    let per_batch = samples / n_batches;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut integrator = Integrator::new(cfg.clone());
    let mut state = initial.clone();
    let mut grad = vec![0.0; d];

    let mut theta_total = StreamingMoments::new(d);
    let mut v_total = StreamingMoments::new(d);
    let mut v_cubic = MarginalCubic::new(d);
    let mut theta_batch = StreamingMoments::new(d);
    let mut v_batch = MarginalCubic::new(d);
    let mut batch_means: Vec<Vec<f64>> = vec![Vec::with_capacity(n_batches); d];
    let mut batch_skews: Vec<Vec<f64>> = vec![Vec::with_capacity(n_batches); d];

    for step in 1..=steps {
        pot.gradient_into(&state.theta, &mut grad);
        integrator.step(&mut state, &grad, &mut rng)?;
        let norm = state.theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > DIVERGENCE_NORM || state.v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step, reason: format!("‖θ‖ = {norm:e}") });
        }
        observer(step, &state);
        if step <= burn_in {
            continue;
        }
        v_total.push(&state.v);
        v_cubic.push(&state.v);
        theta_batch.push(&state.theta);
        v_batch.push(&state.v);
        let k = step - burn_in;
        if k % per_batch == 0 && k / per_batch <= n_batches {
            for i in 0..d {
                batch_means[i].push(theta_batch.mean()[i]);
            }
            for (i, s) in v_batch.skewness().into_iter().enumerate() {
                batch_skews[i].push(s);
            }
            theta_total.merge(&theta_batch);
            theta_batch = StreamingMoments::new(d);
            v_batch = MarginalCubic::new(d);
        }
    }
    theta_total.merge(&theta_batch);

    Ok(SimulationSummary {
        steps,
        burn_in,
        samples,
        mean_theta: theta_total.mean().to_vec(),
        mean_v: v_total.mean().to_vec(),
        cov_theta: theta_total.covariance().transpose().as_slice().to_vec(),
        cov_v: v_total.covariance().transpose().as_slice().to_vec(),
        theta_mean_stderr: batch_means.iter().map(|b| batch_stderr(b)).collect(),
        v_skewness: v_cubic.skewness(),
        v_skewness_stderr: batch_skews.iter().map(|b| batch_stderr(b)).collect(),
        final_state: state,
    })
}

/// CSV sink for trajectories: `step,theta0..,v0..`, one row every `stride`
/// steps.
pub struct TrajectoryWriter<W: Write> {
    inner: W,
    stride: usize,
    header_written: bool,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(inner: W, stride: usize) -> Self {
        TrajectoryWriter { inner, stride: stride.max(1), header_written: false }
    }

    pub fn record(&mut self, step: usize, state: &PhaseState) -> io::Result<()> {
        if !self.header_written {
            let d = state.dim();
            let mut cols = vec!["step".to_string()];
            cols.extend((0..d).map(|i| format!("theta{i}")));
            cols.extend((0..d).map(|i| format!("v{i}")));
            writeln!(self.inner, "{}", cols.join(","))?;
            self.header_written = true;
        }
        if step % self.stride != 0 {
            return Ok(());
        }
        write!(self.inner, "{step}")?;
        for x in state.theta.iter().chain(&state.v) {
            write!(self.inner, ",{x:e}")?;
        }
        writeln!(self.inner)
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streaming_merge_matches_single_pass() {
        let xs: Vec<[f64; 2]> = (0..101).map(|i| [(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos() * 3.0]).collect();
        let mut whole = StreamingMoments::new(2);
        let mut a = StreamingMoments::new(2);
        let mut b = StreamingMoments::new(2);
        for (k, x) in xs.iter().enumerate() {
            whole.push(x);
            if k < 40 {
                a.push(x)
            } else {
                b.push(x)
            }
        }
        a.merge(&b);
        assert_eq!(a.count(), whole.count());
        assert!((a.covariance() - whole.covariance()).amax() < 1e-14);
        assert!((a.mean()[1] - whole.mean()[1]).abs() < 1e-15);
    }

    #[test]
    fn cubic_skewness_of_asymmetric_data() {
        let mut m = MarginalCubic::new(1);
        for x in [0.0, 0.0, 0.0, 3.0] {
            m.push(&[x]);
        }
        // population skewness of {0,0,0,3} is 2/√3
        assert!((m.skewness()[0] - 2.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn noiseless_fixed_point_is_exact() {
        let pot = QuadraticPotential::new(vec![0.5, -1.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 4.0])).unwrap();
        let cfg = LangevinConfig::deterministic(1.0, 1.0, 0.01, 2).unwrap();
        let s = simulate(&cfg, &pot, &PhaseState::at_rest(vec![0.5, -1.0]), 1000, 100, 1).unwrap();
        assert_eq!(s.final_state.theta, vec![0.5, -1.0]);
        assert_eq!(s.final_state.v, vec![0.0, 0.0]);
        assert!(s.cov_theta.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let pot = QuadraticPotential::diagonal(&[1.0]).unwrap();
        // Δt far beyond the stability limit
        let cfg = LangevinConfig::deterministic(1.0, 0.0, 10.0, 1).unwrap();
        let err = simulate(&cfg, &pot, &PhaseState::at_rest(vec![1.0]), 1000, 10, 0).unwrap_err();
        assert!(matches!(err, Error::Divergence { step, .. } if step < 1000));
    }

    #[test]
    fn trajectory_thinning() {
        let mut w = TrajectoryWriter::new(Vec::new(), 3);
        for step in 1..=9 {
            w.record(step, &PhaseState::at_rest(vec![step as f64])).unwrap();
        }
        let text = String::from_utf8(w.into_inner()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,theta0,v0");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("9,9e0"));
    }
}
