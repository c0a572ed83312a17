//! Underdamped Langevin dynamics and its correspondence with momentum SGD.
//!
//! Two velocity conventions meet here. [`PhaseState::v`] is the
//! continuous-time velocity θ̇ for the Langevin integrators, while the
//! momentum-SGD recurrence works with the per-step displacement
//! `v_n = θ_n - θ_{n-1}`. [`PhaseState::to_displacement`] and
//! [`PhaseState::from_displacement`] convert between the two.

mod covariance;
mod dynamics;
mod hyper;
mod simulate;
mod steady;

pub use covariance::{noise_covariance_at, MAX_DENSE_COORDS};
pub use dynamics::{step_underdamped, symmetric_sqrt, Integrator, LangevinConfig, PhaseState, Scheme};
pub use hyper::{
    hyperparam_map, inverse_hyperparam_map, step_momentum_sgd, step_vanilla_sgd, MassFriction, SgdHyperparams,
};
pub use simulate::{
    simulate, simulate_with_observer, SimulationSummary, StreamingMoments, TrajectoryWriter, DIVERGENCE_NORM,
};
pub use steady::{
    analytic_covariances, probability_current, steady_state_density, steady_state_log_density, ProbabilityCurrent,
    QuadraticPotential,
};
