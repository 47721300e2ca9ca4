use serde::{Deserialize, Serialize};

use super::{adam_step, check_len, AdamConfig, AdamState, Autoencoder, Matrix, NnError, Rng, INPUT_DIM};

/// Mini-batch Adam schedule for autoencoder training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    /// Epochs between learning-rate drops.
    pub lr_decay_every: usize,
    /// Divisor applied at each drop.
    pub lr_decay_factor: f64,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 45,
            lr0: 1e-2,
            lr_decay_every: 15,
            lr_decay_factor: 10.0,
            batch_size: 128,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be >= 1");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("lr0 must be positive");
        }
        if !(self.lr_decay_factor > 1.0 && self.lr_decay_factor.is_finite()) {
            return bad("lr_decay_factor must be > 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        Ok(())
    }

    /// Step schedule: `lr0 / factor^floor(epoch / every)`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let drops = epoch / self.lr_decay_every;
        (0..drops).fold(self.lr0, |lr, _| lr / self.lr_decay_factor)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Autoencoder,
    /// Mean per-sample reconstruction loss of each epoch, measured on the
    /// forward pass before each batch's update.
    pub loss_history: Vec<f64>,
}

/// Trains `ae` on the rows of `data` (values in [0, 1]).
///
/// Each epoch visits the rows in a fresh order drawn from `rng`, in batches
/// of `cfg.batch_size`; a trailing short batch is kept.
pub fn train(
    mut ae: Autoencoder,
    data: &Matrix,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<TrainOutcome, NnError> {
    cfg.validate()?;
    let n = data.rows();
    if n == 0 {
        return Err(NnError::EmptyDataset);
    }
    check_len("training data width", INPUT_DIM, data.cols())?;
    if let Some((index, &value)) = data
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(NnError::InputRange { index, value });
    }

    let adam = cfg.adam();
    let mut states: Vec<AdamState> = ae
        .param_groups()
        .iter()
        .map(|g| AdamState::new(g.len()))
        .collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.select_rows(chunk);
            let (loss_sum, grads) = ae.loss_and_gradients(&batch)?;
            if !loss_sum.is_finite() {
                return Err(NnError::Divergence { epoch });
            }
            total += loss_sum;
            for ((params, g), st) in ae
                .param_groups_mut()
                .into_iter()
                .zip(grads.groups())
                .zip(states.iter_mut())
            {
                adam_step(params, g, st, lr, &adam)?;
            }
        }
        let epoch_loss = total / n as f64;
        if !epoch_loss.is_finite() || !ae.is_finite() {
            return Err(NnError::Divergence { epoch });
        }
        log::debug!("epoch {epoch:>3} lr {lr:.0e} loss {epoch_loss:.6}");
        history.push(epoch_loss);
    }
    Ok(TrainOutcome {
        model: ae,
        loss_history: history,
    })
}
