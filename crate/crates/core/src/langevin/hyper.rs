use serde::{Deserialize, Serialize};

use super::PhaseState;
use crate::error::{Error, Result};

/// Momentum ρ and learning rate α of the heavy-ball recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdHyperparams {
    pub momentum: f64,
    pub learning_rate: f64,
}

impl SgdHyperparams {
    pub fn new(momentum: f64, learning_rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::validation(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::validation(format!("learning rate must be positive, got {learning_rate}")));
        }
        Ok(SgdHyperparams { momentum, learning_rate })
    }
}

/// Mass and friction recovered from momentum-SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassFriction {
    pub mass: f64,
    pub friction: f64,
    /// Set when ρ = 0: the mass vanishes and the dynamics are first order.
    pub overdamped: bool,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be positive and finite, got {x}")))
    }
}

/// `ρ = 1 / (1 + γΔt/m)`, `α = Δt / (γ + m/Δt)`.
pub fn hyperparam_map(mass: f64, friction: f64, dt: f64) -> Result<SgdHyperparams> {
    positive("mass", mass)?;
    positive("friction", friction)?;
    positive("time step", dt)?;
    Ok(SgdHyperparams {
        momentum: 1.0 / (1.0 + friction * dt / mass),
        learning_rate: dt / (friction + mass / dt),
    })
}

/// Solves the map for `(m, γ)` at fixed Δt: `m = ρΔt²/α`, `γ = (1 - ρ)Δt/α`.
pub fn inverse_hyperparam_map(hp: SgdHyperparams, dt: f64) -> Result<MassFriction> {
    positive("time step", dt)?;
    positive("learning rate", hp.learning_rate)?;
    if !(0.0..1.0).contains(&hp.momentum) {
        return Err(Error::validation(format!("momentum must lie in [0, 1), got {}", hp.momentum)));
    }
    let (rho, alpha) = (hp.momentum, hp.learning_rate);
    Ok(MassFriction {
        mass: rho * dt * dt / alpha,
        friction: (1.0 - rho) * dt / alpha,
        overdamped: rho == 0.0,
    })
}

/// `v ← ρv − α·grad`, then `θ ← θ + v`. Here `v` is the per-step displacement.
pub fn step_momentum_sgd(state: &PhaseState, grad: &[f64], hp: SgdHyperparams) -> Result<PhaseState> {
    if grad.len() != state.dim() {
        return Err(Error::shape(format!("gradient has {} entries, state has {}", grad.len(), state.dim())));
    }
    let mut next = state.clone();
    for i in 0..grad.len() {
        next.v[i] = hp.momentum * state.v[i] - hp.learning_rate * grad[i];
        next.theta[i] += next.v[i];
    }
    Ok(next)
}

/// `θ ← θ − α·grad`.
pub fn step_vanilla_sgd(theta: &mut [f64], grad: &[f64], learning_rate: f64) {
    for (t, g) in theta.iter_mut().zip(grad) {
        *t -= learning_rate * g;
    }
}
