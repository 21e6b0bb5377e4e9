//! Minimizes the conditional noise-prediction loss with plain SGD.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::denoiser::{squared_error_loss, Denoiser, DenoiserConfig, Example};
use crate::error::{check_len, Error, Result};
use crate::rng::{gaussian_vec, stream, Domain};
use crate::sampler::forward_diffuse;
use crate::schedule::{Schedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_STEPS};
use crate::toyworld::{extract_feature, ToyDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_prob: f64,
    pub seed: u64,
    pub schedule_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub net: DenoiserConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 5e-2,
            dropout_prob: 0.25,
            seed: 0,
            schedule_steps: DEFAULT_STEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
            net: DenoiserConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::Input(format!(
                "dropout probability must be in [0, 1), got {}",
                self.dropout_prob
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Input("batch size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Input("learning rate must be finite and non-negative".into()));
        }
        self.net.validate()
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::linear(self.schedule_steps, self.beta_start, self.beta_end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub final_loss: Option<f64>,
    pub seconds: f64,
    pub config: TrainConfig,
}

/// Clean samples paired 1:1 with their identity conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x0: Vec<Vec<f64>>,
    pub cond: Vec<Vec<f64>>,
}

impl TrainingSet {
    /// Conditions each sample on its own extracted feature, `p⁺ = f(x0)`.
    pub fn from_samples(samples: Vec<Vec<f64>>) -> Result<Self> {
        let cond = samples.iter().map(|x| extract_feature(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { x0: samples, cond })
    }

    pub fn from_toy(data: &ToyDataset) -> Result<Self> {
        Self::from_samples(data.samples.iter().map(|s| s.x0.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }
}

/// Contextual partial dropout.
///
/// With probability `p/2` the whole condition is zeroed; otherwise each entry
/// is zeroed independently with probability `q = (p/2)/(1 - p/2)`, so every
/// entry ends up zero with marginal probability exactly `p`. Kept entries are
/// not rescaled.
pub fn condition_dropout<R: Rng + ?Sized>(cond: &[f64], p: f64, rng: &mut R) -> Vec<f64> {
    if p <= 0.0 {
        return cond.to_vec();
    }
    let whole = p / 2.0;
    if rng.random::<f64>() < whole {
        return vec![0.0; cond.len()];
    }
    let q = whole / (1.0 - whole);
    cond.iter()
        .map(|&c| if rng.random::<f64>() < q { 0.0 } else { c })
        .collect()
}

/// One SGD update on a batch of `(x0, condition)` pairs. Returns the batch
/// loss measured before the update.
pub fn train_step<R: Rng + ?Sized>(
    model: &mut Denoiser,
    x0: &[&[f64]],
    cond: &[&[f64]],
    schedule: &Schedule,
    rng: &mut R,
    dropout_prob: f64,
    learning_rate: f64,
) -> Result<f64> {
    check_len("batch conditions", x0.len(), cond.len())?;
    let d = model.config().data_dim;
    let mut noised = Vec::with_capacity(x0.len());
    for (x, c) in x0.iter().zip(cond) {
        let t = rng.random_range(1..=schedule.steps());
        let eps = gaussian_vec(rng, d);
        let c = condition_dropout(c, dropout_prob, rng);
        let x_t = forward_diffuse(x, t, &eps, schedule)?;
        noised.push((x_t, t, c, eps));
    }
    let batch: Vec<Example<'_>> = noised
        .iter()
        .map(|(x_t, t, c, eps)| Example {
            x_t,
            t: *t,
            cond: c,
            target: eps,
        })
        .collect();
    let (loss, grads) = squared_error_loss(model, &batch)?;
    if !loss.is_finite() {
        return Err(Error::TrainingDivergence {
            epoch: 0,
            step: 0,
            loss,
        });
    }
    model.apply_sgd(&grads, learning_rate);
    if !model.is_finite() {
        return Err(Error::TrainingDivergence {
            epoch: 0,
            step: 0,
            loss: f64::NAN,
        });
    }
    Ok(loss)
}

/// Trains a fresh denoiser. Deterministic for a fixed `(config, data)`.
pub fn train(config: &TrainConfig, data: &TrainingSet) -> Result<(Denoiser, TrainReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    check_len("training conditions", data.x0.len(), data.cond.len())?;
    for (x, c) in data.x0.iter().zip(&data.cond) {
        check_len("training sample", config.net.data_dim, x.len())?;
        check_len("training condition", config.net.cond_dim, c.len())?;
    }
    let schedule = config.schedule()?;
    let mut model = Denoiser::new(
        config.net.clone(),
        schedule.steps(),
        &mut stream(config.seed, Domain::Init, 0, 0),
    )?;
    let mut rng = stream(config.seed, Domain::Training, 0, 0);
    let start = Instant::now();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| data.x0[i].as_slice()).collect();
            let cs: Vec<&[f64]> = chunk.iter().map(|&i| data.cond[i].as_slice()).collect();
            let loss = train_step(
                &mut model,
                &xs,
                &cs,
                &schedule,
                &mut rng,
                config.dropout_prob,
                config.learning_rate,
            )
            .map_err(|e| match e {
                Error::TrainingDivergence { loss, .. } => Error::TrainingDivergence { epoch, step, loss },
                other => other,
            })?;
            sum += loss;
            batches += 1;
        }
        epoch_losses.push(sum / batches as f64);
    }
    let report = TrainReport {
        final_loss: epoch_losses.last().copied(),
        epoch_losses,
        seconds: start.elapsed().as_secs_f64(),
        config: config.clone(),
    };
    Ok((model, report))
}
