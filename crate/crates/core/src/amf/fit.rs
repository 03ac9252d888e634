//! Minibatch Adam training with clamping, patience-based stopping and
//! best-iterate selection.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{
    accumulate_gradients, cosine_similarity_mean, full_loss, norm_weights, overestimation_ratio, reconstruct_row, Adam,
    AmfConfig, AmfModel, Gradients, ModelMetadata, Workspace,
};
use crate::correlation::CorrelationDataset;
use crate::error::{LavaError, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct AmfRunResult {
    pub model: AmfModel,
    /// Lowest full-dataset loss seen; the returned model is that iterate.
    pub final_loss: f64,
    pub loss_curve: Vec<f64>,
    pub overestimation_ratio: f64,
    pub cosine_similarity_mean: f64,
    pub epochs_run: usize,
}

impl AmfRunResult {
    pub fn metadata(&self, config: &AmfConfig) -> ModelMetadata {
        ModelMetadata {
            schema_version: 1,
            num_localities: self.model.num_localities(),
            num_modules: self.model.num_modules(),
            num_pairs: self.model.num_pairs(),
            config: config.clone(),
            final_loss: self.final_loss,
            overestimation_ratio: self.overestimation_ratio,
            cosine_similarity_mean: self.cosine_similarity_mean,
            epochs_run: self.epochs_run,
            loss_curve: self.loss_curve.clone(),
        }
    }
}

/// Uniform `[0, 1)` presences and modules drawn from `seed`.
pub fn initial_model(num_localities: usize, num_pairs: usize, num_modules: usize, seed: u64) -> AmfModel {
    let mut rng = rng_from_seed(derive_seed(seed, "amf-init", 0));
    let presences = Matrix::from_fn(num_localities, num_modules, |_, _| rng.random::<f64>());
    let modules = Matrix::from_fn(num_modules, num_pairs, |_, _| rng.random::<f64>());
    AmfModel { modules, presences }
}

/// Tracks the stopping rule: stop once `patience` epochs pass without the
/// loss dropping below `(1 - tol)` times the last reference loss.
struct Patience {
    tol: f64,
    patience: usize,
    reference: f64,
    reference_epoch: usize,
}

impl Patience {
    fn new(tol: f64, patience: usize) -> Self {
        Patience {
            tol,
            patience,
            reference: f64::INFINITY,
            reference_epoch: 0,
        }
    }

    /// Returns true when training should stop.
    fn update(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.reference * (1.0 - self.tol) || !self.reference.is_finite() {
            self.reference = loss;
            self.reference_epoch = epoch;
        }
        epoch - self.reference_epoch >= self.patience
    }
}

/// Fits a model from a uniform random initialization.
pub fn fit(c: &CorrelationDataset, config: &AmfConfig) -> Result<AmfRunResult> {
    let init = initial_model(c.num_localities(), c.num_pairs(), config.num_modules, config.seed);
    fit_from(c, init, config)
}

/// Fits a model starting from `init`.
pub fn fit_from(c: &CorrelationDataset, init: AmfModel, config: &AmfConfig) -> Result<AmfRunResult> {
    config.validate()?;
    init.check_data(c)?;
    if c.num_localities() == 0 {
        return Err(LavaError::param("no localities to factorize"));
    }
    if init.num_modules() != config.num_modules {
        return Err(LavaError::param("initial model has the wrong number of modules"));
    }
    let ell = c.num_localities();
    let weights = norm_weights(c);
    let mut model = init;
    model.clamp();
    let mut adam_p = Adam::new(config.adam, model.presences.as_slice().len());
    let mut adam_m = Adam::new(config.adam, model.modules.as_slice().len());
    let mut grads = Gradients {
        presences: Matrix::zeros(ell, model.num_modules()),
        modules: Matrix::zeros(model.num_modules(), model.num_pairs()),
    };
    let mut ws = Workspace::new(model.num_pairs());
    let mut rng = rng_from_seed(derive_seed(config.seed, "amf-shuffle", 0));
    let mut order: Vec<usize> = (0..ell).collect();

    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut curve = Vec::new();
    let mut stop = Patience::new(config.improvement_tol, config.patience_epochs);

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            accumulate_gradients(c, &model, config, &weights, batch, &mut grads, &mut ws);
            adam_p.step(model.presences.as_mut_slice(), grads.presences.as_slice());
            adam_m.step(model.modules.as_mut_slice(), grads.modules.as_slice());
            model.clamp();
        }
        let loss = full_loss(c, &model, config, &weights);
        if !loss.is_finite() {
            return Err(LavaError::Numerical(format!("AMF loss became {loss} at epoch {epoch}")));
        }
        curve.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&model);
        }
        if stop.update(epoch, loss) {
            break;
        }
    }

    Ok(AmfRunResult {
        overestimation_ratio: overestimation_ratio(c, &best),
        cosine_similarity_mean: cosine_similarity_mean(c, &best, config.nu),
        epochs_run: curve.len(),
        final_loss: best_loss,
        loss_curve: curve,
        model: best,
    })
}

/// Quantile (pinball) loss of one row: mean over entries of `rho_tau(C - C_hat)`.
pub fn pinball_loss(c_row: &[f32], chat: &[f64], tau: f64) -> f64 {
    let total: f64 = c_row
        .iter()
        .zip(chat)
        .map(|(&c, &h)| {
            let u = f64::from(c) - h;
            if u >= 0.0 {
                tau * u
            } else {
                (tau - 1.0) * u
            }
        })
        .sum();
    total / c_row.len() as f64
}

fn pinball_total(c: &CorrelationDataset, model: &AmfModel, tau: f64) -> f64 {
    let k = model.num_pairs();
    let mut chat = vec![0.0; k];
    let mut arg = vec![0; k];
    (0..c.num_localities())
        .map(|i| {
            reconstruct_row(model, i, &mut chat, &mut arg);
            pinball_loss(c.row(i), &chat, tau)
        })
        .sum()
}

/// Re-fits the presences with modules frozen under the pinball loss at
/// quantile `tau`, using the same optimizer, clamping and stopping rule.
pub fn fine_tune_presences(c: &CorrelationDataset, model: &AmfModel, tau: f64, config: &AmfConfig) -> Result<AmfModel> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(LavaError::param("tau must be in (0, 1)"));
    }
    config.validate()?;
    model.check_data(c)?;
    let ell = c.num_localities();
    let k = model.num_pairs();
    let kf = k as f64;
    let mut current = model.clone();
    current.clamp();
    let mut adam = Adam::new(config.adam, current.presences.as_slice().len());
    let mut grad = Matrix::zeros(ell, current.num_modules());
    let mut rng = rng_from_seed(derive_seed(config.seed, "finetune-shuffle", 0));
    let mut order: Vec<usize> = (0..ell).collect();
    let mut chat = vec![0.0; k];
    let mut arg = vec![0; k];

    let mut best = current.clone();
    let mut best_loss = f64::INFINITY;
    let mut stop = Patience::new(config.improvement_tol, config.patience_epochs);

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.as_mut_slice().fill(0.0);
            let scale = 1.0 / (batch.len() as f64 * kf);
            for &i in batch {
                reconstruct_row(&current, i, &mut chat, &mut arg);
                let g = grad.row_mut(i);
                for (cidx, ((&cv, &h), &m)) in c.row(i).iter().zip(&chat).zip(&arg).enumerate() {
                    let u = f64::from(cv) - h;
                    let d = if u > 0.0 {
                        -tau
                    } else if u < 0.0 {
                        1.0 - tau
                    } else {
                        0.0
                    };
                    g[m] += d * scale * current.modules.get(m, cidx);
                }
            }
            adam.step(current.presences.as_mut_slice(), grad.as_slice());
            for v in current.presences.as_mut_slice() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        let loss = pinball_total(c, &current, tau);
        if !loss.is_finite() {
            return Err(LavaError::Numerical(format!(
                "pinball loss became {loss} at epoch {epoch}"
            )));
        }
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&current);
        }
        if stop.update(epoch, loss) {
            break;
        }
    }
    Ok(best)
}
