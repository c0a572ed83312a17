//! Momentum-SGD training with checkpoints.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sgnlab_core::langevin::{step_momentum_sgd, PhaseState, SgdHyperparams};
use sgnlab_core::net::{accuracy, batch_loss_and_gradient, NetSpec, Params, Sample};
use sgnlab_core::Error;

use crate::config::TrainSchedule;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub params: Params,
}

/// On-disk checkpoint: the spec, the epoch and the flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub net: NetSpec,
    pub epoch: usize,
    pub fingerprint: String,
    pub params: Vec<f64>,
}

impl CheckpointFile {
    pub fn new(spec: &NetSpec, ckpt: &Checkpoint) -> Self {
        CheckpointFile {
            net: spec.clone(),
            epoch: ckpt.epoch,
            fingerprint: ckpt.params.fingerprint(),
            params: ckpt.params.as_flat().to_vec(),
        }
    }

    pub fn into_checkpoint(self) -> Result<(NetSpec, Checkpoint)> {
        let params = Params::from_flat(&self.net, self.params)?;
        if params.fingerprint() != self.fingerprint {
            return Err(Error::Validation("checkpoint fingerprint does not match its parameters".into()).into());
        }
        Ok((self.net, Checkpoint { epoch: self.epoch, params }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// In ascending epoch order.
    pub checkpoints: Vec<Checkpoint>,
    /// Mean training loss of each epoch's mini-batches.
    pub epoch_losses: Vec<f64>,
    pub final_accuracy: f64,
}

impl TrainOutcome {
    pub fn checkpoint(&self, epoch: usize) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.epoch == epoch)
    }
}

pub fn learning_rate_at(schedule: &TrainSchedule, epoch: usize) -> f64 {
    match schedule.lr_drop_epoch {
        Some(drop) if epoch > drop => schedule.learning_rate * schedule.lr_drop_factor,
        _ => schedule.learning_rate,
    }
}

/// Heavy-ball SGD over reshuffled epochs. The weight decay enters the
/// gradient as `λθ`. Checkpoints are taken after the listed epochs (epoch 0
/// is the initialization).
pub fn train(spec: &NetSpec, schedule: &TrainSchedule, data: &[Sample], checkpoint_epochs: &[usize]) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::Validation("training set is empty".into()).into());
    }
    let init = Params::init_uniform(spec, schedule.seed);
    let mut state = PhaseState::at_rest(init.as_flat().to_vec());
    let mut checkpoints = Vec::new();
    if checkpoint_epochs.contains(&0) {
        checkpoints.push(Checkpoint { epoch: 0, params: init.clone() });
    }
    let mut params = init;
    let mut epoch_losses = Vec::with_capacity(schedule.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=schedule.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let hp = SgdHyperparams { momentum: schedule.momentum, learning_rate: learning_rate_at(schedule, epoch) };
        let mut loss_sum = 0.0;
        for chunk in order.chunks(schedule.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = batch_loss_and_gradient(&params, spec, &batch)?;
            let mut g = grad.into_vec();
            if schedule.weight_decay > 0.0 {
                for (gi, ti) in g.iter_mut().zip(&state.theta) {
                    *gi += schedule.weight_decay * ti;
                }
            }
            state = step_momentum_sgd(&state, &g, hp)?;
            params.as_flat_mut().copy_from_slice(&state.theta);
            loss_sum += loss * chunk.len() as f64;
        }
        let epoch_loss = loss_sum / data.len() as f64;
        if !epoch_loss.is_finite() || state.theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step: epoch, reason: format!("training loss {epoch_loss}") }.into());
        }
        log::info!("epoch {epoch}: loss {epoch_loss:.6}");
        epoch_losses.push(epoch_loss);
        if checkpoint_epochs.contains(&epoch) {
            checkpoints.push(Checkpoint { epoch, params: params.clone() });
        }
    }
    let final_accuracy = accuracy(&params, spec, data)?;
    Ok(TrainOutcome { checkpoints, epoch_losses, final_accuracy })
}
