use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::{init_with_rng, MlpArchitecture, MlpGradient, MlpParameters};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::score::{ScoreField, TransitionPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 30,
            seed: 0,
            optimizer: Optimizer::default(),
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Usage(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Usage("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch training curve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Sample-weighted mean surrogate loss over each epoch's minibatches.
    pub epoch_loss: Vec<f64>,
    /// Standard deviation of the minibatch losses within each epoch.
    pub epoch_loss_std: Vec<f64>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<super::Layer>,
    v: Vec<super::Layer>,
}

impl Adam {
    fn new(params: &MlpParameters, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = MlpParameters::zeros(params.arch()).expect("validated architecture").layers;
        Adam {
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn apply(&mut self, params: &mut MlpParameters, grad: &MlpGradient, lr: f64) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, m), v), g) in params.layers_mut().iter_mut().zip(&mut self.m).zip(&mut self.v).zip(&grad.layers) {
            Zip::from(&mut layer.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .and(&g.weight)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(update);
        }
    }
}

fn sgd_apply(params: &mut MlpParameters, grad: &MlpGradient, lr: f64) {
    for (layer, g) in params.layers_mut().iter_mut().zip(&grad.layers) {
        layer.weight.scaled_add(-lr, &g.weight);
        layer.bias.scaled_add(-lr, &g.bias);
    }
}

/// Minibatch minimisation of the surrogate loss, starting from
/// [`init_params`](super::init_params)`(arch, config.seed)`.
pub fn train(arch: &MlpArchitecture, dataset: &[TransitionPair], config: &TrainConfig) -> Result<(MlpParameters, TrainHistory)> {
    arch.validate()?;
    config.validate()?;
    let mut rng = SimRng::new(config.seed);
    let params = init_with_rng(arch, &mut rng);
    train_from(params, dataset, config, &mut rng)
}

/// Continues training from given parameters. Shuffling draws from `rng`.
pub(crate) fn train_from(
    mut params: MlpParameters,
    dataset: &[TransitionPair],
    config: &TrainConfig,
    rng: &mut SimRng,
) -> Result<(MlpParameters, TrainHistory)> {
    if dataset.len() < config.batch_size {
        return Err(Error::Usage(format!(
            "dataset has {} pairs, fewer than batch_size {}",
            dataset.len(),
            config.batch_size
        )));
    }
    if let Some(p) = dataset.iter().find(|p| p.dim() != params.state_dim()) {
        return Err(Error::DimensionMismatch {
            context: "training pair",
            expected: params.state_dim(),
            actual: p.dim(),
        });
    }
    let mut adam = match config.optimizer {
        Optimizer::Adam { beta1, beta2, eps } => Some(Adam::new(&params, beta1, beta2, eps)),
        Optimizer::Sgd => None,
    };
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        if config.shuffle {
            rng.shuffle(&mut order);
        }
        let mut weighted = 0.0;
        let mut batch_losses = Vec::with_capacity(order.len() / config.batch_size + 1);
        for idx in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| dataset[i].clone()));
            let (loss, grad) = params.loss_gradient(&batch).map_err(|e| Error::TrainingDiverged {
                epoch,
                reason: e.to_string(),
            })?;
            weighted += loss * batch.len() as f64;
            batch_losses.push(loss);
            match adam.as_mut() {
                Some(adam) => adam.apply(&mut params, &grad, config.learning_rate),
                None => sgd_apply(&mut params, &grad, config.learning_rate),
            }
        }
        let mean_loss = weighted / dataset.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                reason: "epoch loss is not finite".into(),
            });
        }
        let batch_mean = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;
        let std = (batch_losses.iter().map(|l| (l - batch_mean).powi(2)).sum::<f64>() / batch_losses.len() as f64).sqrt();
        history.epoch_loss.push(mean_loss);
        history.epoch_loss_std.push(std);
    }
    Ok((params, history))
}

/// Accuracy of a learned field against a reference score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccuracyReport {
    /// `mean ‖ψ − score‖²`.
    pub mse: f64,
    /// `mean ‖score‖²`.
    pub var_scale: f64,
    /// `mse / var_scale`.
    pub rel_error: f64,
}

pub fn evaluate_accuracy<M, O>(model: &M, oracle: &O, eval_pairs: &[TransitionPair]) -> Result<AccuracyReport>
where
    M: ScoreField + ?Sized,
    O: ScoreField + ?Sized,
{
    if eval_pairs.is_empty() {
        return Err(Error::Usage("accuracy evaluation needs at least one pair".into()));
    }
    crate::error::check_dim("evaluate_accuracy", oracle.dim(), model.dim())?;
    let mut se = 0.0;
    let mut sq = 0.0;
    for pair in eval_pairs {
        let learned = model.score(pair.next(), pair.prev());
        let truth = oracle.score(pair.next(), pair.prev());
        se += learned.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        sq += truth.iter().map(|t| t * t).sum::<f64>();
    }
    let n = eval_pairs.len() as f64;
    let (mse, var_scale) = (se / n, sq / n);
    if var_scale == 0.0 {
        return Err(Error::Domain("var_scale is zero, relative error undefined".into()));
    }
    Ok(AccuracyReport {
        mse,
        var_scale,
        rel_error: mse / var_scale,
    })
}
