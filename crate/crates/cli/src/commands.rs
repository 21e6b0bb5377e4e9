//! Pipeline stages behind the `negdiff` subcommands.
//!
//! Every command is a deterministic function of its configuration and input
//! files; wall-clock timings go to the returned reports only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};

use negdiff_core::rng::{stream, Domain};
use negdiff_core::{
    balanced_pairs, bias_metrics, draw_contexts, evaluate, extract_feature, fold_accuracy, histogram, make_dataset,
    sample_identities, score_pairs, select_negatives, train, DatasetHeader, GeneratedDataset, MetricsReport,
    NegativeAssignment, Provenance, SamplerMode, ScoreSet, TrainReport, TrainingSet,
};

use crate::config::{RunConfig, SampleStrategy};
use crate::format::{
    fixed, format_histogram, format_manifest, format_metrics, read_checkpoint, read_dataset, write_checkpoint,
    write_dataset,
};

/// Sibling path `<stem>.<suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Generates the toy training set and writes it as a vector file.
pub fn cmd_gen_data(cfg: &RunConfig, out: &Path) -> Result<GeneratedDataset> {
    let toy = make_dataset(&cfg.toy_config())?;
    let k = cfg.data_samples_per_id;
    let groups = toy
        .samples
        .chunks(k)
        .map(|c| c.iter().map(|s| s.x0.clone()).collect())
        .collect();
    let ds = GeneratedDataset::new(
        DatasetHeader {
            identities: cfg.data_identities,
            samples_per_identity: k,
            dim: cfg.data_dim,
            provenance: Provenance::ToyData,
            guidance_w: 0.0,
            sampler: None,
            seed: cfg.seed,
        },
        groups,
    )?;
    write_dataset(out, &ds)?;
    Ok(ds)
}

/// Trains on a vector file; writes the checkpoint and `<out>.losses.tsv`.
pub fn cmd_train(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<TrainReport> {
    let ds = read_dataset(dataset)?;
    ensure!(
        ds.header.dim == cfg.data_dim,
        "dataset dimension {} does not match data.dim = {}",
        ds.header.dim,
        cfg.data_dim
    );
    let set = TrainingSet::from_samples(ds.rows().map(<[f64]>::to_vec).collect())
        .context("dataset contains a zero vector")?;
    let tc = cfg.train_config();
    let (model, report) = train(&tc, &set)?;
    write_checkpoint(out, &model, &tc.schedule()?)?;
    let mut losses = String::from("epoch\tmean_loss\n");
    for (e, l) in report.epoch_losses.iter().enumerate() {
        writeln!(losses, "{}\t{}", e + 1, fixed(*l)).unwrap();
    }
    write_text(&sibling(out, "losses.tsv"), &losses)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub dataset: GeneratedDataset,
    pub assignment: Option<NegativeAssignment>,
}

/// Draws `sample.identities` contexts, assigns negatives per
/// `sample.strategy`, and samples `sample.per_identity` vectors each.
///
/// A guided run with `w = 0` is recorded as a baseline run: the negative
/// branch has no effect, and the vector file is byte-identical to one from
/// positive-only sampling with the same seed. The manifest still records the
/// assignment.
pub fn cmd_sample(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> Result<SampleOutput> {
    let (model, schedule) = read_checkpoint(checkpoint)?;
    let cond_dim = model.config().cond_dim;
    let mut options = cfg.sampler_options();
    if options.mode == SamplerMode::Ddpm {
        options.steps = schedule.steps();
    }
    let contexts = draw_contexts(
        cfg.sample_identities,
        cond_dim,
        &mut stream(cfg.seed, Domain::Contexts, 0, 0),
        cfg.sample_normalize,
    )?;
    let positives: Vec<Vec<f64>> = contexts.iter().map(|c| c.vector.clone()).collect();
    let assignment = match cfg.sample_strategy {
        SampleStrategy::Baseline => None,
        SampleStrategy::Negative(s) => Some(select_negatives(
            &contexts,
            s,
            Some(&mut stream(cfg.seed, Domain::NegativeSelection, 0, 0)),
        )?),
    };
    let negatives: Option<Vec<Vec<f64>>> = assignment
        .as_ref()
        .map(|a| a.pairs.iter().map(|p| p.vector.clone()).collect());
    let groups = sample_identities(
        &model,
        &positives,
        negatives.as_deref(),
        &options,
        &schedule,
        cfg.sample_per_identity,
    )?;
    let (provenance, w) = match (&assignment, options.guidance_w) {
        (Some(a), w) if w != 0.0 => (Provenance::Guided(a.strategy), w),
        _ => (Provenance::Baseline, 0.0),
    };
    let dataset = GeneratedDataset::new(
        DatasetHeader {
            identities: cfg.sample_identities,
            samples_per_identity: cfg.sample_per_identity,
            dim: model.config().data_dim,
            provenance,
            guidance_w: w,
            sampler: Some((options.mode, options.steps)),
            seed: cfg.seed,
        },
        groups,
    )?;
    write_dataset(out, &dataset)?;
    if let Some(a) = &assignment {
        write_text(&sibling(out, "manifest.tsv"), &format_manifest(a))?;
    }
    Ok(SampleOutput { dataset, assignment })
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub scores: ScoreSet,
    pub report: MetricsReport,
    pub accuracy: f64,
    pub metrics_csv: String,
    pub histogram_csv: String,
}

pub fn evaluate_dataset(cfg: &RunConfig, ds: &GeneratedDataset) -> Result<EvalOutput> {
    if ds.header.identities < 2 {
        bail!(
            "evaluation needs at least 2 identities, dataset has {}",
            ds.header.identities
        );
    }
    let scores = score_pairs(&ds.groups, extract_feature, cfg.pairing())?;
    let report = evaluate(&scores)?;
    let labeled = balanced_pairs(&scores, cfg.seed);
    let folds = cfg.eval_folds.min(labeled.len());
    let accuracy = fold_accuracy(&labeled, folds)?;
    let (lo, hi, bins) = (cfg.eval_hist_lo, cfg.eval_hist_hi, cfg.eval_hist_bins);
    let g = histogram(&scores.genuine, bins, lo, hi)?;
    let i = histogram(&scores.impostor, bins, lo, hi)?;
    Ok(EvalOutput {
        metrics_csv: format_metrics(&report, Some(accuracy)),
        histogram_csv: format_histogram(lo, hi, &g, &i),
        scores,
        report,
        accuracy,
    })
}

/// Scores a vector file. With `out`, writes the metrics table there and the
/// histogram table to `<out>.hist.csv`.
pub fn cmd_eval(cfg: &RunConfig, dataset: &Path, out: Option<&Path>) -> Result<EvalOutput> {
    let ds = read_dataset(dataset)?;
    let result = evaluate_dataset(cfg, &ds)?;
    if let Some(out) = out {
        write_text(out, &result.metrics_csv)?;
        write_text(&sibling(out, "hist.csv"), &result.histogram_csv)?;
    }
    Ok(result)
}

/// Per-group accuracies (percent) to a `metric,value` table.
pub fn cmd_bias(accuracies: &[f64]) -> Result<String> {
    let r = bias_metrics(accuracies)?;
    let mut out = String::from("metric,value\n");
    for (i, a) in r.accuracies.iter().enumerate() {
        writeln!(out, "group_{},{}", i + 1, fixed(*a)).unwrap();
    }
    writeln!(out, "average,{}", fixed(r.average)).unwrap();
    writeln!(out, "std,{}", fixed(r.std)).unwrap();
    writeln!(out, "ser,{}", fixed(r.ser)).unwrap();
    Ok(out)
}

/// Evaluates several vector files into one comparison table.
pub fn cmd_report(cfg: &RunConfig, datasets: &[PathBuf]) -> Result<String> {
    ensure!(!datasets.is_empty(), "report needs at least one dataset");
    let mut out = String::from("dataset,source,w,eer,fmr100,fmr1000,g_mean,g_std,i_mean,i_std,fdr\n");
    for path in datasets {
        let ds = read_dataset(path)?;
        let r = evaluate_dataset(cfg, &ds)?.report;
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        writeln!(
            out,
            "{name},{},{},{},{},{},{},{},{},{},{}",
            ds.header.provenance,
            fixed(ds.header.guidance_w),
            fixed(r.eer),
            fixed(r.fmr100.fnmr),
            fixed(r.fmr1000.fnmr),
            fixed(r.stats.g_mean),
            fixed(r.stats.g_std),
            fixed(r.stats.i_mean),
            fixed(r.stats.i_std),
            fixed(r.fdr),
        )
        .unwrap();
    }
    Ok(out)
}
