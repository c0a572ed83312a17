use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const SQRT_CLIP: f64 = 1e-12;

/// Position and velocity of the particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhaseState {
    pub fn new(theta: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if theta.len() != v.len() {
            return Err(Error::shape(format!("θ has {} entries, v has {}", theta.len(), v.len())));
        }
        if theta.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::validation("phase state entries must be finite"));
        }
        Ok(PhaseState { theta, v })
    }

    pub fn at_rest(theta: Vec<f64>) -> Self {
        let v = vec![0.0; theta.len()];
        PhaseState { theta, v }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Velocity θ̇ → per-step displacement Δθ = Δt·θ̇.
    pub fn to_displacement(&self, dt: f64) -> PhaseState {
        PhaseState { theta: self.theta.clone(), v: self.v.iter().map(|v| v * dt).collect() }
    }

    /// Per-step displacement → velocity.
    pub fn from_displacement(&self, dt: f64) -> PhaseState {
        PhaseState { theta: self.theta.clone(), v: self.v.iter().map(|v| v / dt).collect() }
    }
}

/// Time discretization of `m θ̈ + γ θ̇ = −∇φ(θ) + η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Explicit Euler–Maruyama for v, then θ advanced with the new v:
    /// `v ← v + Δt(−γv − ∇φ(θ))/m + √Δt·√D·ξ/m`, `θ ← θ + Δt·v`.
    #[default]
    EulerMaruyama,
    /// Friction taken at the new velocity,
    /// `m(u_n − u_{n−1})/Δt + γu_n = −∇φ(θ_{n−1}) + √D·ξ/√Δt`, `θ_n = θ_{n−1} + Δt·u_n`.
    /// Without noise this is exactly heavy-ball momentum under
    /// [`super::hyperparam_map`] with `v_n = Δt·u_n`.
    SemiImplicit,
}

/// Mass, friction, time step and a constant diffusion matrix `D = Δt·C`.
#[derive(Debug, Clone)]
pub struct LangevinConfig {
    mass: f64,
    friction: f64,
    dt: f64,
    diffusion: DMatrix<f64>,
    diffusion_sqrt: DMatrix<f64>,
    scheme: Scheme,
}

impl LangevinConfig {
    /// Friction may be zero (free or conservative motion); mass and Δt must
    /// be positive; `diffusion` must be symmetric positive semidefinite.
    pub fn new(mass: f64, friction: f64, dt: f64, diffusion: DMatrix<f64>) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::validation(format!("mass must be positive, got {mass}")));
        }
        if !(friction >= 0.0 && friction.is_finite()) {
            return Err(Error::validation(format!("friction must be non-negative, got {friction}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation(format!("time step must be positive, got {dt}")));
        }
        let diffusion_sqrt = symmetric_sqrt(&diffusion)?;
        Ok(LangevinConfig { mass, friction, dt, diffusion, diffusion_sqrt, scheme: Scheme::default() })
    }

    /// Sets `D = Δt·C` from a gradient-noise covariance `C`.
    pub fn from_noise_covariance(mass: f64, friction: f64, dt: f64, covariance: &DMatrix<f64>) -> Result<Self> {
        Self::new(mass, friction, dt, covariance * dt)
    }

    /// Noiseless dynamics in `dim` dimensions.
    pub fn deterministic(mass: f64, friction: f64, dt: f64, dim: usize) -> Result<Self> {
        Self::new(mass, friction, dt, DMatrix::zeros(dim, dim))
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn friction(&self) -> f64 {
        self.friction
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.diffusion.nrows()
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    /// `C = D / Δt`.
    pub fn noise_covariance(&self) -> DMatrix<f64> {
        &self.diffusion / self.dt
    }

    pub fn diffusion_sqrt(&self) -> &DMatrix<f64> {
        &self.diffusion_sqrt
    }

    pub fn is_noiseless(&self) -> bool {
        self.diffusion.iter().all(|&x| x == 0.0)
    }
}

/// Principal square root of a symmetric PSD matrix via eigendecomposition.
/// Eigenvalues in `[-1e-10·scale, 1e-12)` are clipped to zero; anything more
/// negative is rejected.
pub fn symmetric_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::shape(format!("matrix is {}x{}, expected square", a.nrows(), a.ncols())));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::validation(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    if n == 0 {
        return Ok(a.clone());
    }
    let eig = SymmetricEigen::new(a.clone());
    if let Some(&low) = eig.eigenvalues.iter().find(|&&l| l < -PSD_TOL * scale) {
        return Err(Error::validation(format!("matrix is not positive semidefinite (eigenvalue {low:e})")));
    }
    let roots = eig.eigenvalues.map(|l| if l < SQRT_CLIP { 0.0 } else { l.sqrt() });
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Reusable stepping buffers for long trajectories.
#[derive(Debug, Clone)]
pub struct Integrator {
    cfg: LangevinConfig,
    xi: Vec<f64>,
    kick: Vec<f64>,
}

impl Integrator {
    pub fn new(cfg: LangevinConfig) -> Self {
        let d = cfg.dim();
        Integrator { cfg, xi: vec![0.0; d], kick: vec![0.0; d] }
    }

    pub fn config(&self) -> &LangevinConfig {
        &self.cfg
    }

    /// Advances `state` in place given `grad = ∇φ(θ)` at the current θ.
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut PhaseState, grad: &[f64], rng: &mut R) -> Result<()> {
        let d = self.cfg.dim();
        if state.dim() != d || grad.len() != d {
            return Err(Error::shape(format!(
                "state has dimension {}, gradient {}, diffusion {d}",
                state.dim(),
                grad.len()
            )));
        }
        let LangevinConfig { mass, friction, dt, .. } = self.cfg;
        if self.cfg.is_noiseless() {
            self.kick.iter_mut().for_each(|k| *k = 0.0);
        } else {
            for x in self.xi.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let root = &self.cfg.diffusion_sqrt;
            let sdt = dt.sqrt();
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += root[(i, j)] * self.xi[j];
                }
                self.kick[i] = sdt * acc;
            }
        }
        match self.cfg.scheme {
            Scheme::EulerMaruyama => {
                for i in 0..d {
                    let v = state.v[i];
                    state.v[i] = v + (dt * (-friction * v - grad[i]) + self.kick[i]) / mass;
                    state.theta[i] += dt * state.v[i];
                }
            }
            Scheme::SemiImplicit => {
                let denom = mass + friction * dt;
                for i in 0..d {
                    state.v[i] = (mass * state.v[i] - dt * grad[i] + self.kick[i]) / denom;
                    state.theta[i] += dt * state.v[i];
                }
            }
        }
        Ok(())
    }
}

/// One step of the underdamped Langevin integrator selected by `cfg`.
pub fn step_underdamped<F, R>(
    state: &PhaseState,
    potential_grad: F,
    cfg: &LangevinConfig,
    rng: &mut R,
) -> Result<PhaseState>
where
    F: Fn(&[f64]) -> Vec<f64>,
    R: Rng + ?Sized,
{
    let grad = potential_grad(&state.theta);
    let mut next = state.clone();
    Integrator::new(cfg.clone()).step(&mut next, &grad, rng)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sqrt_squares_back() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let r = symmetric_sqrt(&a).unwrap();
        assert!((&r * &r - &a).amax() < 1e-12);
    }

    #[test]
    fn sqrt_clips_tiny_negative_and_rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-13]);
        let r = symmetric_sqrt(&a).unwrap();
        assert_eq!(r[(1, 1)], 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        assert!(matches!(symmetric_sqrt(&bad), Err(Error::Validation(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(symmetric_sqrt(&asym).is_err());
        assert!(LangevinConfig::new(1.0, 1.0, 0.1, bad).is_err());
    }

    #[test]
    fn ballistic_motion() {
        let cfg = LangevinConfig::deterministic(1.0, 0.0, 0.1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = PhaseState::new(vec![1.0, -1.0], vec![0.5, 2.0]).unwrap();
        for _ in 0..100 {
            s = step_underdamped(&s, |t| vec![0.0; t.len()], &cfg, &mut rng).unwrap();
        }
        assert!((s.theta[0] - 6.0).abs() < 1e-12 && (s.theta[1] - 19.0).abs() < 1e-12);
        assert_eq!(s.v, vec![0.5, 2.0]);
    }

    #[test]
    fn damped_oscillator_loses_energy() {
        for scheme in [Scheme::EulerMaruyama, Scheme::SemiImplicit] {
            let cfg = LangevinConfig::deterministic(1.0, 0.5, 1e-3, 1).unwrap().with_scheme(scheme);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut s = PhaseState::new(vec![1.0], vec![0.0]).unwrap();
            let energy = |s: &PhaseState| 0.5 * s.v[0] * s.v[0] + 0.5 * s.theta[0] * s.theta[0];
            let mut e = energy(&s);
            for _ in 0..20_000 {
                s = step_underdamped(&s, |t| t.to_vec(), &cfg, &mut rng).unwrap();
                let next = energy(&s);
                // the explicit scheme's discrete energy carries an O(Δt²) wobble
                assert!(next <= e * (1.0 + 1e-6), "{next} > {e}");
                e = next;
            }
            assert!(e < 1e-3);
        }
    }

    #[test]
    fn displacement_roundtrip() {
        let s = PhaseState::new(vec![1.0], vec![3.0]).unwrap();
        let d = s.to_displacement(0.5);
        assert_eq!(d.v, vec![1.5]);
        assert_eq!(d.from_displacement(0.5), s);
    }
}
