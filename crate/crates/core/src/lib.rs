//! Negative-condition guided sampling for identity-conditioned diffusion
//! models, on a low-dimensional toy world, with the verification metrics
//! used to judge identity separability.
//!
//! The pipeline is: [`toyworld`] builds clustered training data,
//! [`trainer`] fits the [`denoiser`] under a [`schedule`], [`contexts`]
//! draws identities and picks a negative for each, [`sampler`] generates
//! samples with `(1 + w)·ε(p⁺) − w·ε(p⁻)` guidance, and [`biometrics`]
//! scores the result.

pub mod biometrics;
pub mod contexts;
pub mod dataset;
pub mod denoiser;
pub mod error;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod toyworld;
pub mod trainer;

pub use biometrics::{
    balanced_pairs, bias_metrics, eer, evaluate, fdr, fdr_from_moments, fnmr_at_fmr, fold_accuracy, histogram,
    score_pairs, score_stats, BiasReport, LabeledScore, MetricsReport, OperatingPoint, Pairing, ScoreSet, ScoreStats,
};
pub use contexts::{
    distance, draw_contexts, select_negatives, IdentityContext, NegativeAssignment, NegativePair, NegativeSource,
    Strategy,
};
pub use dataset::{DatasetHeader, GeneratedDataset, Provenance};
pub use denoiser::{time_embedding, Denoiser, DenoiserConfig, Gradients, Layer};
pub use error::{Error, Result};
pub use sampler::{
    ddim_step, ddim_timesteps, ddpm_step, forward_diffuse, guided_eps, sample_identities, sample_identity, ChainState,
    NoisePredictor, SamplerMode, SamplerOptions,
};
pub use schedule::Schedule;
pub use toyworld::{extract_feature, make_dataset, ToyConfig, ToyDataset};
pub use trainer::{condition_dropout, train, train_step, TrainConfig, TrainReport, TrainingSet};
