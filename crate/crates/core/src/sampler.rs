//! Reverse diffusion with positive-only or negative-guided conditioning.
//!
//! The guided noise estimate is `(1 + w)·ε(x, t, p⁺) − w·ε(x, t, p⁻)`. Both
//! the ancestral DDPM update and the deterministic (η = 0) DDIM update take
//! that estimate in place of the plain conditional prediction.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::denoiser::Denoiser;
use crate::error::{check_len, Error, Result};
use crate::rng::{gaussian_vec, stream, Domain};
use crate::schedule::Schedule;

/// Anything that predicts the noise in `x_t` given a step and a condition.
pub trait NoisePredictor: Sync {
    fn data_dim(&self) -> usize;
    fn predict(&self, x_t: &[f64], t: usize, cond: &[f64]) -> Result<Vec<f64>>;
}

impl NoisePredictor for Denoiser {
    fn data_dim(&self) -> usize {
        self.config().data_dim
    }

    fn predict(&self, x_t: &[f64], t: usize, cond: &[f64]) -> Result<Vec<f64>> {
        self.predict_eps(x_t, t, cond)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    Ddpm,
    Ddim,
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMode::Ddpm => "ddpm",
            SamplerMode::Ddim => "ddim",
        })
    }
}

impl FromStr for SamplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddpm" => Ok(SamplerMode::Ddpm),
            "ddim" => Ok(SamplerMode::Ddim),
            _ => Err(Error::Input(format!("unknown sampler mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerOptions {
    pub mode: SamplerMode,
    pub steps: usize,
    pub guidance_w: f64,
    pub seed: u64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            mode: SamplerMode::Ddim,
            steps: 200,
            guidance_w: 0.5,
            seed: 0,
        }
    }
}

impl SamplerOptions {
    pub fn validate(&self, schedule: &Schedule) -> Result<()> {
        if !(self.guidance_w >= 0.0 && self.guidance_w.is_finite()) {
            return Err(Error::Input(format!(
                "guidance weight must be finite and non-negative, got {}",
                self.guidance_w
            )));
        }
        match self.mode {
            SamplerMode::Ddpm if self.steps != schedule.steps() => Err(Error::Input(format!(
                "ancestral sampling runs all {} steps, got {}",
                schedule.steps(),
                self.steps
            ))),
            SamplerMode::Ddim if self.steps == 0 || self.steps > schedule.steps() => Err(Error::Input(format!(
                "DDIM steps must be in [1, {}], got {}",
                schedule.steps(),
                self.steps
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub t: usize,
}

/// `√ᾱ_t·x0 + √(1−ᾱ_t)·ε`.
pub fn forward_diffuse(x0: &[f64], t: usize, eps: &[f64], schedule: &Schedule) -> Result<Vec<f64>> {
    schedule.check_step(t)?;
    check_len("noise", x0.len(), eps.len())?;
    let ab = schedule.alpha_bar(t);
    Ok(mix(x0, eps, ab.sqrt(), (1.0 - ab).sqrt()))
}

fn mix(a: &[f64], b: &[f64], ca: f64, cb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| ca * x + cb * y).collect()
}

/// Negative-guided noise estimate. Always evaluates the predictor twice.
pub fn guided_eps<P: NoisePredictor + ?Sized>(
    model: &P,
    x_t: &[f64],
    t: usize,
    p_pos: &[f64],
    p_neg: &[f64],
    w: f64,
) -> Result<Vec<f64>> {
    let pos = model.predict(x_t, t, p_pos)?;
    let neg = model.predict(x_t, t, p_neg)?;
    check_len("negative prediction", pos.len(), neg.len())?;
    if w == 0.0 {
        return Ok(pos);
    }
    Ok(mix(&pos, &neg, 1.0 + w, -w))
}

/// Ancestral step `t → t−1`. `zeta` must be present exactly when `t > 1`.
pub fn ddpm_step(state: &ChainState, eps_hat: &[f64], schedule: &Schedule, zeta: Option<&[f64]>) -> Result<ChainState> {
    let t = state.t;
    schedule.check_step(t)?;
    check_len("noise estimate", state.x.len(), eps_hat.len())?;
    let alpha = schedule.alpha(t);
    let coef = (1.0 - alpha) / (1.0 - schedule.alpha_bar(t)).sqrt();
    let inv_sqrt_alpha = 1.0 / alpha.sqrt();
    let mut x: Vec<f64> = state
        .x
        .iter()
        .zip(eps_hat)
        .map(|(xt, e)| inv_sqrt_alpha * (xt - coef * e))
        .collect();
    match (t > 1, zeta) {
        (true, Some(z)) => {
            check_len("step noise", x.len(), z.len())?;
            let sigma = schedule.sigma(t);
            x.iter_mut().zip(z).for_each(|(v, z)| *v += sigma * z);
        }
        (true, None) => return Err(Error::NoiseStream(format!("missing step noise at t={t}"))),
        (false, Some(_)) => return Err(Error::NoiseStream("no step noise is added at t=1".into())),
        (false, None) => {}
    }
    Ok(ChainState { x, t: t - 1 })
}

/// Deterministic DDIM step `t → t_prev`; `t_prev = 0` returns the clean
/// estimate x̂0.
pub fn ddim_step(state: &ChainState, eps_hat: &[f64], schedule: &Schedule, t_prev: usize) -> Result<ChainState> {
    let t = state.t;
    schedule.check_step(t)?;
    if t_prev >= t {
        return Err(Error::StepOrder { from: t, to: t_prev });
    }
    check_len("noise estimate", state.x.len(), eps_hat.len())?;
    let x0_hat = predict_x0(&state.x, eps_hat, schedule.alpha_bar(t));
    let ab_prev = schedule.alpha_bar(t_prev);
    Ok(ChainState {
        x: mix(&x0_hat, eps_hat, ab_prev.sqrt(), (1.0 - ab_prev).sqrt()),
        t: t_prev,
    })
}

/// x̂0 = (x_t − √(1−ᾱ)·ε̂)/√ᾱ.
pub fn predict_x0(x_t: &[f64], eps_hat: &[f64], alpha_bar: f64) -> Vec<f64> {
    let s = (1.0 - alpha_bar).sqrt();
    let inv = 1.0 / alpha_bar.sqrt();
    x_t.iter().zip(eps_hat).map(|(x, e)| (x - s * e) * inv).collect()
}

/// DDIM visiting steps `τ_i = ⌈i·T/S⌉`, `i = 1..=S`, in ascending order.
pub fn ddim_timesteps(total: usize, steps: usize) -> Result<Vec<usize>> {
    if steps == 0 || steps > total {
        return Err(Error::Input(format!("DDIM steps must be in [1, {total}], got {steps}")));
    }
    Ok((1..=steps).map(|i| (i * total).div_ceil(steps)).collect())
}

/// Runs one full chain. The chain draws its start point and every step noise
/// from the stream keyed by `(options.seed, identity, index)`.
pub fn sample_chain<P: NoisePredictor + ?Sized>(
    model: &P,
    p_pos: &[f64],
    p_neg: Option<&[f64]>,
    options: &SamplerOptions,
    schedule: &Schedule,
    identity: u32,
    index: u32,
) -> Result<Vec<f64>> {
    let d = model.data_dim();
    let mut rng = stream(options.seed, Domain::Chain, identity, index);
    let mut state = ChainState {
        x: gaussian_vec(&mut rng, d),
        t: schedule.steps(),
    };
    let eps = |state: &ChainState| -> Result<Vec<f64>> {
        match p_neg {
            Some(neg) => guided_eps(model, &state.x, state.t, p_pos, neg, options.guidance_w),
            None => model.predict(&state.x, state.t, p_pos),
        }
    };
    match options.mode {
        SamplerMode::Ddpm => {
            while state.t >= 1 {
                let e = eps(&state)?;
                let zeta = (state.t > 1).then(|| gaussian_vec(&mut rng, d));
                state = ddpm_step(&state, &e, schedule, zeta.as_deref())?;
            }
        }
        SamplerMode::Ddim => {
            let taus = ddim_timesteps(schedule.steps(), options.steps)?;
            for i in (0..taus.len()).rev() {
                let t_prev = if i == 0 { 0 } else { taus[i - 1] };
                state.t = taus[i];
                let e = eps(&state)?;
                state = ddim_step(&state, &e, schedule, t_prev)?;
            }
        }
    }
    Ok(state.x)
}

fn check_model(model: &Denoiser, schedule: &Schedule) -> Result<()> {
    if !model.is_finite() {
        return Err(Error::Checkpoint("model parameters are not finite".into()));
    }
    if model.max_step() != schedule.steps() {
        return Err(Error::Checkpoint(format!(
            "model trained for {} steps, schedule has {}",
            model.max_step(),
            schedule.steps()
        )));
    }
    Ok(())
}

/// `count` samples for one identity; sample `k` uses chain stream
/// `(options.seed, identity, k)`. Without a negative this is plain
/// positive-only sampling.
pub fn sample_identity(
    model: &Denoiser,
    p_pos: &[f64],
    p_neg: Option<&[f64]>,
    options: &SamplerOptions,
    schedule: &Schedule,
    identity: u32,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    check_model(model, schedule)?;
    options.validate(schedule)?;
    (0..count as u32)
        .into_par_iter()
        .map(|k| sample_chain(model, p_pos, p_neg, options, schedule, identity, k))
        .collect()
}

/// Samples `count` vectors for every identity, ordered by
/// `(identity, sample index)` regardless of scheduling. `negatives[i]`, when
/// given, is the negative condition of `positives[i]`.
pub fn sample_identities(
    model: &Denoiser,
    positives: &[Vec<f64>],
    negatives: Option<&[Vec<f64>]>,
    options: &SamplerOptions,
    schedule: &Schedule,
    count: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    check_model(model, schedule)?;
    options.validate(schedule)?;
    if let Some(neg) = negatives {
        check_len("negative conditions", positives.len(), neg.len())?;
    }
    let jobs: Vec<(usize, usize)> = (0..positives.len())
        .flat_map(|i| (0..count).map(move |k| (i, k)))
        .collect();
    let flat: Vec<Vec<f64>> = jobs
        .into_par_iter()
        .map(|(i, k)| {
            let neg = negatives.map(|n| n[i].as_slice());
            sample_chain(model, &positives[i], neg, options, schedule, i as u32, k as u32)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(positives.len());
    let mut it = flat.into_iter();
    for _ in 0..positives.len() {
        out.push(it.by_ref().take(count).collect());
    }
    Ok(out)
}
