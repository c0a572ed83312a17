//! Algorithms for measuring stochastic gradient noise in small dense
//! networks and for the Langevin-dynamics picture of momentum SGD.
//!
//! * [`net`]: dense feed-forward networks with exact per-sample backprop.
//! * [`noise`]: mini-batch gradient noise at a frozen parameter snapshot.
//! * [`stats`]: Shapiro-Wilk, moment summaries, Berry-Esseen distances and
//!   tail-index estimation.
//! * [`langevin`]: underdamped Langevin integration, the momentum-SGD
//!   hyperparameter correspondence and the quadratic steady state.

pub mod error;
pub mod langevin;
pub mod net;
pub mod noise;
pub mod stats;
pub mod sum;

pub use error::{Error, Result};
pub use langevin::{LangevinConfig, PhaseState, QuadraticPotential, SgdHyperparams};
pub use net::{Gradient, NetSpec, Params, Sample};
pub use noise::{NoiseSampleSet, ProbeConfig};
pub use stats::{MomentSummary, SwResult, TailIndexEstimate};
