use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `φ(θ) = ½ (θ − θ*)ᵀ H* (θ − θ*)` with `H*` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    minimizer: DVector<f64>,
    hessian: DMatrix<f64>,
    hessian_inv: DMatrix<f64>,
}

impl QuadraticPotential {
    pub fn new(minimizer: Vec<f64>, hessian: DMatrix<f64>) -> Result<Self> {
        let d = minimizer.len();
        if hessian.nrows() != d || hessian.ncols() != d {
            return Err(Error::shape(format!(
                "Hessian is {}x{}, minimizer has {d} entries",
                hessian.nrows(),
                hessian.ncols()
            )));
        }
        if minimizer.iter().chain(hessian.iter()).any(|x| !x.is_finite()) {
            return Err(Error::validation("potential has non-finite entries"));
        }
        let scale = hessian.amax().max(1.0);
        if (&hessian - hessian.transpose()).amax() > 1e-10 * scale {
            return Err(Error::validation("Hessian is not symmetric"));
        }
        let chol = hessian
            .clone()
            .cholesky()
            .ok_or_else(|| Error::validation("Hessian is not positive definite"))?;
        Ok(QuadraticPotential { minimizer: DVector::from_vec(minimizer), hessian, hessian_inv: chol.inverse() })
    }

    /// Diagonal Hessian centred at the origin.
    pub fn diagonal(eigenvalues: &[f64]) -> Result<Self> {
        let d = eigenvalues.len();
        Self::new(vec![0.0; d], DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues)))
    }

    pub fn dim(&self) -> usize {
        self.minimizer.len()
    }

    pub fn minimizer(&self) -> &[f64] {
        self.minimizer.as_slice()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn hessian_inverse(&self) -> &DMatrix<f64> {
        &self.hessian_inv
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let x = DVector::from_column_slice(theta) - &self.minimizer;
        0.5 * x.dot(&(&self.hessian * &x))
    }

    /// `H* (θ − θ*)`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.gradient_into(theta, &mut out);
        out
    }

    pub fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.hessian[(i, j)] * (theta[j] - self.minimizer[j]);
            }
            *o = acc;
        }
    }

    fn check(&self, theta: &[f64], v: &[f64]) -> Result<()> {
        if theta.len() != self.dim() || v.len() != self.dim() {
            return Err(Error::shape(format!(
                "θ has {} and v has {} entries, potential has dimension {}",
                theta.len(),
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Exponent of the quadratic steady state:
/// `−(γ/Δt)|θ − θ*|² − (γ/Δt) vᵀ H*⁻¹ v`.
pub fn steady_state_log_density(theta: &[f64], v: &[f64], friction: f64, dt: f64, pot: &QuadraticPotential) -> Result<f64> {
    pot.check(theta, v)?;
    if !(friction > 0.0 && dt > 0.0) {
        return Err(Error::validation("friction and time step must be positive"));
    }
    let x = DVector::from_column_slice(theta) - &pot.minimizer;
    let v = DVector::from_column_slice(v);
    let k = friction / dt;
    Ok(-k * x.norm_squared() - k * v.dot(&(&pot.hessian_inv * &v)))
}

/// Unnormalized steady-state density; equals 1 at `(θ*, 0)`.
pub fn steady_state_density(theta: &[f64], v: &[f64], friction: f64, dt: f64, pot: &QuadraticPotential) -> Result<f64> {
    steady_state_log_density(theta, v, friction, dt, pot).map(f64::exp)
}

/// Gaussian covariances of the steady state: `(Δt/2γ)·I` for θ and
/// `(Δt/2γ)·H*` for v.
pub fn analytic_covariances(friction: f64, dt: f64, pot: &QuadraticPotential) -> (DMatrix<f64>, DMatrix<f64>) {
    let c = dt / (2.0 * friction);
    (DMatrix::identity(pot.dim(), pot.dim()) * c, pot.hessian() * c)
}

/// Probability current of the Kramers equation at one phase-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityCurrent {
    pub j_theta: Vec<f64>,
    pub j_v: Vec<f64>,
    pub density: f64,
}

impl ProbabilityCurrent {
    pub fn theta_norm(&self) -> f64 {
        self.j_theta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn v_norm(&self) -> f64 {
        self.j_v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `J_θ = −v·π`, `J_v = (γv + ∇φ(θ))·π + ½ D ∇_v π`, with the sign convention
/// under which the continuity equation reads `∂π/∂t = div J`.
///
/// `∇_v π` is a central difference with step `1e-5 · max(|v_i|, √(Δt/2γ))`,
/// so `density` only needs to be evaluable, not differentiable in closed form.
pub fn probability_current<F>(
    theta: &[f64],
    v: &[f64],
    friction: f64,
    dt: f64,
    pot: &QuadraticPotential,
    diffusion: &DMatrix<f64>,
    density: F,
) -> Result<ProbabilityCurrent>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    pot.check(theta, v)?;
    let d = pot.dim();
    if diffusion.nrows() != d || diffusion.ncols() != d {
        return Err(Error::shape(format!("diffusion is {}x{}, expected {d}x{d}", diffusion.nrows(), diffusion.ncols())));
    }
    if !(friction > 0.0 && dt > 0.0) {
        return Err(Error::validation("friction and time step must be positive"));
    }
    let pi = density(theta, v);
    let width = (dt / (2.0 * friction)).sqrt();
    let mut grad_v = vec![0.0; d];
    let mut probe = v.to_vec();
    for i in 0..d {
        let h = 1e-5 * v[i].abs().max(width);
        probe[i] = v[i] + h;
        let up = density(theta, &probe);
        probe[i] = v[i] - h;
        let down = density(theta, &probe);
        probe[i] = v[i];
        grad_v[i] = (up - down) / (2.0 * h);
    }
    let force = pot.gradient(theta);
    let j_theta = v.iter().map(|vi| -vi * pi).collect();
    let j_v = (0..d)
        .map(|i| {
            let diff: f64 = (0..d).map(|j| diffusion[(i, j)] * grad_v[j]).sum();
            (friction * v[i] + force[i]) * pi + 0.5 * diff
        })
        .collect();
    Ok(ProbabilityCurrent { j_theta, j_v, density: pi })
}
