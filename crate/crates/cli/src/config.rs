//! Flat `section.key = value` run configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use negdiff_core::{DenoiserConfig, Pairing, SamplerMode, SamplerOptions, Strategy, ToyConfig, TrainConfig};

/// Negative strategy for sampling, or none for positive-only conditioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleStrategy {
    Baseline,
    Negative(Strategy),
}

impl fmt::Display for SampleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleStrategy::Baseline => f.write_str("baseline"),
            SampleStrategy::Negative(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for SampleStrategy {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("baseline") {
            return Ok(SampleStrategy::Baseline);
        }
        Ok(SampleStrategy::Negative(s.parse()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingMode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,

    pub data_identities: usize,
    pub data_samples_per_id: usize,
    pub data_dim: usize,
    pub data_noise_scale: f64,

    pub schedule_steps: usize,
    pub schedule_beta_start: f64,
    pub schedule_beta_end: f64,

    pub net_time_dim: usize,
    pub net_hidden: Vec<usize>,

    pub train_epochs: usize,
    pub train_batch_size: usize,
    pub train_learning_rate: f64,
    pub train_dropout_prob: f64,

    pub sampler_mode: SamplerMode,
    pub sampler_steps: usize,
    pub sampler_guidance_w: f64,

    pub sample_identities: usize,
    pub sample_per_identity: usize,
    pub sample_strategy: SampleStrategy,
    pub sample_normalize: bool,

    pub eval_pairing: PairingMode,
    pub eval_impostor_pairs: usize,
    pub eval_hist_bins: usize,
    pub eval_hist_lo: f64,
    pub eval_hist_hi: f64,
    pub eval_folds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let toy = ToyConfig::default();
        let train = TrainConfig::default();
        let sampler = SamplerOptions::default();
        Self {
            seed: 0,
            data_identities: toy.identities,
            data_samples_per_id: toy.samples_per_id,
            data_dim: toy.dim,
            data_noise_scale: toy.noise_scale,
            schedule_steps: train.schedule_steps,
            schedule_beta_start: train.beta_start,
            schedule_beta_end: train.beta_end,
            net_time_dim: train.net.time_dim,
            net_hidden: train.net.hidden.clone(),
            train_epochs: train.epochs,
            train_batch_size: train.batch_size,
            train_learning_rate: train.learning_rate,
            train_dropout_prob: train.dropout_prob,
            sampler_mode: sampler.mode,
            sampler_steps: sampler.steps,
            sampler_guidance_w: sampler.guidance_w,
            sample_identities: 100,
            sample_per_identity: 10,
            sample_strategy: SampleStrategy::Negative(Strategy::FarNeg),
            sample_normalize: true,
            eval_pairing: PairingMode::Exhaustive,
            eval_impostor_pairs: 10_000,
            eval_hist_bins: 40,
            eval_hist_lo: -1.0,
            eval_hist_hi: 1.0,
            eval_folds: 10,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("bad value `{value}` for `{key}`: {e}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "seed",
        "data.identities",
        "data.samples_per_id",
        "data.dim",
        "data.noise_scale",
        "schedule.steps",
        "schedule.beta_start",
        "schedule.beta_end",
        "net.time_dim",
        "net.hidden",
        "train.epochs",
        "train.batch_size",
        "train.learning_rate",
        "train.dropout_prob",
        "sampler.mode",
        "sampler.steps",
        "sampler.guidance_w",
        "sample.identities",
        "sample.per_identity",
        "sample.strategy",
        "sample.normalize",
        "eval.pairing",
        "eval.impostor_pairs",
        "eval.hist_bins",
        "eval.hist_lo",
        "eval.hist_hi",
        "eval.folds",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "data.identities" => self.data_identities = parse(key, v)?,
            "data.samples_per_id" => self.data_samples_per_id = parse(key, v)?,
            "data.dim" => self.data_dim = parse(key, v)?,
            "data.noise_scale" => self.data_noise_scale = parse(key, v)?,
            "schedule.steps" => self.schedule_steps = parse(key, v)?,
            "schedule.beta_start" => self.schedule_beta_start = parse(key, v)?,
            "schedule.beta_end" => self.schedule_beta_end = parse(key, v)?,
            "net.time_dim" => self.net_time_dim = parse(key, v)?,
            "net.hidden" => self.net_hidden = parse_list(key, v)?,
            "train.epochs" => self.train_epochs = parse(key, v)?,
            "train.batch_size" => self.train_batch_size = parse(key, v)?,
            "train.learning_rate" => self.train_learning_rate = parse(key, v)?,
            "train.dropout_prob" => self.train_dropout_prob = parse(key, v)?,
            "sampler.mode" => self.sampler_mode = parse(key, v)?,
            "sampler.steps" => self.sampler_steps = parse(key, v)?,
            "sampler.guidance_w" => self.sampler_guidance_w = parse(key, v)?,
            "sample.identities" => self.sample_identities = parse(key, v)?,
            "sample.per_identity" => self.sample_per_identity = parse(key, v)?,
            "sample.strategy" => self.sample_strategy = parse(key, v)?,
            "sample.normalize" => self.sample_normalize = parse(key, v)?,
            "eval.pairing" => {
                self.eval_pairing = match v {
                    "exhaustive" => PairingMode::Exhaustive,
                    "sampled" => PairingMode::Sampled,
                    _ => bail!("bad value `{v}` for `{key}`: expected exhaustive or sampled"),
                }
            }
            "eval.impostor_pairs" => self.eval_impostor_pairs = parse(key, v)?,
            "eval.hist_bins" => self.eval_hist_bins = parse(key, v)?,
            "eval.hist_lo" => self.eval_hist_lo = parse(key, v)?,
            "eval.hist_hi" => self.eval_hist_hi = parse(key, v)?,
            "eval.folds" => self.eval_folds = parse(key, v)?,
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "seed" => self.seed.to_string(),
            "data.identities" => self.data_identities.to_string(),
            "data.samples_per_id" => self.data_samples_per_id.to_string(),
            "data.dim" => self.data_dim.to_string(),
            "data.noise_scale" => self.data_noise_scale.to_string(),
            "schedule.steps" => self.schedule_steps.to_string(),
            "schedule.beta_start" => self.schedule_beta_start.to_string(),
            "schedule.beta_end" => self.schedule_beta_end.to_string(),
            "net.time_dim" => self.net_time_dim.to_string(),
            "net.hidden" => self
                .net_hidden
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "train.epochs" => self.train_epochs.to_string(),
            "train.batch_size" => self.train_batch_size.to_string(),
            "train.learning_rate" => self.train_learning_rate.to_string(),
            "train.dropout_prob" => self.train_dropout_prob.to_string(),
            "sampler.mode" => self.sampler_mode.to_string(),
            "sampler.steps" => self.sampler_steps.to_string(),
            "sampler.guidance_w" => self.sampler_guidance_w.to_string(),
            "sample.identities" => self.sample_identities.to_string(),
            "sample.per_identity" => self.sample_per_identity.to_string(),
            "sample.strategy" => self.sample_strategy.to_string(),
            "sample.normalize" => self.sample_normalize.to_string(),
            "eval.pairing" => match self.eval_pairing {
                PairingMode::Exhaustive => "exhaustive".into(),
                PairingMode::Sampled => "sampled".into(),
            },
            "eval.impostor_pairs" => self.eval_impostor_pairs.to_string(),
            "eval.hist_bins" => self.eval_hist_bins.to_string(),
            "eval.hist_lo" => self.eval_hist_lo.to_string(),
            "eval.hist_hi" => self.eval_hist_hi.to_string(),
            "eval.folds" => self.eval_folds.to_string(),
            _ => return None,
        })
    }

    /// Parses config text on top of the defaults. Unknown or repeated keys
    /// are errors; `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", no + 1))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                bail!("line {}: duplicate key `{key}`", no + 1);
            }
            cfg.set(key, value).with_context(|| format!("line {}", no + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn toy_config(&self) -> ToyConfig {
        ToyConfig {
            identities: self.data_identities,
            samples_per_id: self.data_samples_per_id,
            dim: self.data_dim,
            noise_scale: self.data_noise_scale,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train_epochs,
            batch_size: self.train_batch_size,
            learning_rate: self.train_learning_rate,
            dropout_prob: self.train_dropout_prob,
            seed: self.seed,
            schedule_steps: self.schedule_steps,
            beta_start: self.schedule_beta_start,
            beta_end: self.schedule_beta_end,
            net: DenoiserConfig {
                data_dim: self.data_dim,
                cond_dim: self.data_dim,
                time_dim: self.net_time_dim,
                hidden: self.net_hidden.clone(),
            },
        }
    }

    pub fn sampler_options(&self) -> SamplerOptions {
        SamplerOptions {
            mode: self.sampler_mode,
            steps: self.sampler_steps,
            guidance_w: self.sampler_guidance_w,
            seed: self.seed,
        }
    }

    pub fn pairing(&self) -> Pairing {
        match self.eval_pairing {
            PairingMode::Exhaustive => Pairing::Exhaustive,
            PairingMode::Sampled => Pairing::Sampled {
                identity_pairs: self.eval_impostor_pairs,
                seed: self.seed,
            },
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in Self::KEYS {
            writeln!(f, "{key} = {}", self.get(key).expect("listed key"))?;
        }
        Ok(())
    }
}
