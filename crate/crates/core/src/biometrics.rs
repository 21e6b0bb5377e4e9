//! Verification and separability metrics over genuine/impostor scores.
//!
//! Scores are cosine similarities: higher means more similar, and a match is
//! declared when `score >= threshold`.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::toyworld::dot;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Every within-identity and every cross-identity sample pair.
    Exhaustive,
    /// All genuine pairs; impostors from `identity_pairs` distinct identity
    /// pairs (or all of them, if fewer), one random sample pair each.
    Sampled { identity_pairs: usize, seed: u64 },
}

/// Scores sample pairs of `groups`, where `groups[i]` holds identity `i`'s
/// samples. Output order follows identity, then sample index.
pub fn score_pairs<F>(groups: &[Vec<Vec<f64>>], extractor: F, pairing: Pairing) -> Result<ScoreSet>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if groups.len() < 2 {
        return Err(Error::ImpostorPairs(groups.len()));
    }
    let feats: Vec<Vec<Vec<f64>>> = groups
        .iter()
        .map(|g| g.iter().map(|x| extractor(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    if feats.iter().any(Vec::is_empty) {
        return Err(Error::Input("every identity needs at least one sample".into()));
    }

    let mut genuine = Vec::new();
    for f in &feats {
        for i in 0..f.len() {
            for j in i + 1..f.len() {
                genuine.push(dot(&f[i], &f[j]));
            }
        }
    }
    if genuine.is_empty() {
        return Err(Error::Input(
            "genuine pairs need an identity with at least 2 samples".into(),
        ));
    }

    let n = feats.len();
    let mut impostor = Vec::new();
    match pairing {
        Pairing::Exhaustive => {
            for a in 0..n {
                for b in a + 1..n {
                    for fa in &feats[a] {
                        for fb in &feats[b] {
                            impostor.push(dot(fa, fb));
                        }
                    }
                }
            }
        }
        Pairing::Sampled { identity_pairs, seed } => {
            let total = n * (n - 1) / 2;
            let mut rng = stream(seed, Domain::Pairing, 0, 0);
            let mut chosen = index::sample(&mut rng, total, identity_pairs.min(total)).into_vec();
            chosen.sort_unstable();
            let mut next = chosen.into_iter().peekable();
            let mut flat = 0usize;
            'outer: for a in 0..n {
                for b in a + 1..n {
                    if next.peek() == Some(&flat) {
                        next.next();
                        let i = rng.random_range(0..feats[a].len());
                        let j = rng.random_range(0..feats[b].len());
                        impostor.push(dot(&feats[a][i], &feats[b][j]));
                        if next.peek().is_none() {
                            break 'outer;
                        }
                    }
                    flat += 1;
                }
            }
        }
    }
    Ok(ScoreSet { genuine, impostor })
}

/// One point on the FMR/FNMR trade-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub fmr: f64,
    pub fnmr: f64,
}

/// Error rates at every candidate threshold: `−∞`, each midpoint between
/// adjacent distinct pooled scores, and `+∞`, in ascending order.
fn sweep(scores: &ScoreSet) -> Result<Vec<OperatingPoint>> {
    if scores.genuine.is_empty() || scores.impostor.is_empty() {
        return Err(Error::Input(
            "genuine and impostor scores must both be non-empty".into(),
        ));
    }
    if scores.genuine.iter().chain(&scores.impostor).any(|s| s.is_nan()) {
        return Err(Error::Input("scores contain NaN".into()));
    }
    let mut gen = scores.genuine.clone();
    let mut imp = scores.impostor.clone();
    gen.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);
    let mut pooled: Vec<f64> = gen.iter().chain(&imp).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();

    let (ng, ni) = (gen.len() as f64, imp.len() as f64);
    let at = |tau: f64| {
        let gen_below = gen.partition_point(|&s| s < tau);
        let imp_below = imp.partition_point(|&s| s < tau);
        OperatingPoint {
            threshold: tau,
            fmr: (imp.len() - imp_below) as f64 / ni,
            fnmr: gen_below as f64 / ng,
        }
    };
    let mut points = Vec::with_capacity(pooled.len() + 1);
    points.push(at(f64::NEG_INFINITY));
    for w in pooled.windows(2) {
        points.push(at((w[0] + w[1]) / 2.0));
    }
    points.push(at(f64::INFINITY));
    Ok(points)
}

/// Equal error rate: `(FMR + FNMR)/2` at the threshold minimizing
/// `|FMR − FNMR|`, the smallest such threshold on ties.
pub fn eer(scores: &ScoreSet) -> Result<(f64, f64)> {
    let points = sweep(scores)?;
    let mut best = points[0];
    for p in &points[1..] {
        if (p.fmr - p.fnmr).abs() < (best.fmr - best.fnmr).abs() {
            best = *p;
        }
    }
    Ok(((best.fmr + best.fnmr) / 2.0, best.threshold))
}

/// Lowest FNMR over thresholds with `FMR <= fmr_ceiling`.
pub fn fnmr_at_fmr(scores: &ScoreSet, fmr_ceiling: f64) -> Result<OperatingPoint> {
    if !(fmr_ceiling > 0.0 && fmr_ceiling < 1.0) {
        return Err(Error::Input(format!(
            "FMR ceiling must be in (0, 1), got {fmr_ceiling}"
        )));
    }
    let points = sweep(scores)?;
    let mut best: Option<OperatingPoint> = None;
    for p in points.into_iter().filter(|p| p.fmr <= fmr_ceiling) {
        if best.is_none_or(|b| p.fnmr < b.fnmr) {
            best = Some(p);
        }
    }
    // +∞ always qualifies
    Ok(best.expect("the +inf threshold has FMR 0"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreStats {
    pub g_mean: f64,
    pub g_std: f64,
    pub i_mean: f64,
    pub i_std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn score_stats(scores: &ScoreSet) -> Result<ScoreStats> {
    if scores.genuine.is_empty() || scores.impostor.is_empty() {
        return Err(Error::Input(
            "genuine and impostor scores must both be non-empty".into(),
        ));
    }
    let (g_mean, g_std) = mean_std(&scores.genuine);
    let (i_mean, i_std) = mean_std(&scores.impostor);
    Ok(ScoreStats {
        g_mean,
        g_std,
        i_mean,
        i_std,
    })
}

/// Fisher discriminant ratio from summary moments.
pub fn fdr_from_moments(g_mean: f64, g_std: f64, i_mean: f64, i_std: f64) -> Result<f64> {
    let denom = g_std * g_std + i_std * i_std;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateDistribution("combined variance is zero".into()));
    }
    Ok((g_mean - i_mean).powi(2) / denom)
}

/// `(μ_G − μ_I)² / (σ_G² + σ_I²)` with population variances.
pub fn fdr(scores: &ScoreSet) -> Result<f64> {
    if scores.genuine.len() < 2 || scores.impostor.len() < 2 {
        return Err(Error::Input(
            "FDR needs at least 2 genuine and 2 impostor scores".into(),
        ));
    }
    let s = score_stats(scores)?;
    fdr_from_moments(s.g_mean, s.g_std, s.i_mean, s.i_std)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub eer: f64,
    pub eer_threshold: f64,
    pub fmr100: OperatingPoint,
    pub fmr1000: OperatingPoint,
    pub fdr: f64,
    pub stats: ScoreStats,
    pub genuine_count: usize,
    pub impostor_count: usize,
}

pub fn evaluate(scores: &ScoreSet) -> Result<MetricsReport> {
    let (eer_value, eer_threshold) = eer(scores)?;
    Ok(MetricsReport {
        eer: eer_value,
        eer_threshold,
        fmr100: fnmr_at_fmr(scores, 0.01)?,
        fmr1000: fnmr_at_fmr(scores, 0.001)?,
        fdr: fdr(scores)?,
        stats: score_stats(scores)?,
        genuine_count: scores.genuine.len(),
        impostor_count: scores.impostor.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub score: f64,
    pub genuine: bool,
}

fn accuracy_at(pairs: &[LabeledScore], tau: f64) -> f64 {
    let correct = pairs.iter().filter(|p| (p.score >= tau) == p.genuine).count();
    correct as f64 / pairs.len() as f64
}

/// Midpoint threshold with the best accuracy on `train`, smallest on ties.
/// With a single distinct score, that score is the only candidate.
fn best_threshold(train: &[LabeledScore]) -> f64 {
    let mut sorted = train.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    let genuine_total = sorted.iter().filter(|p| p.genuine).count();
    // correct(τ) = genuine at or above τ + impostors below τ
    let (mut gen_below, mut imp_below) = (0usize, 0usize);
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].score;
        while i < sorted.len() && sorted[i].score == v {
            if sorted[i].genuine {
                gen_below += 1;
            } else {
                imp_below += 1;
            }
            i += 1;
        }
        if i == sorted.len() {
            break;
        }
        let tau = (v + sorted[i].score) / 2.0;
        let correct = genuine_total - gen_below + imp_below;
        if best.is_none_or(|b| correct > b.1) {
            best = Some((tau, correct));
        }
    }
    best.map_or(sorted[0].score, |b| b.0)
}

/// Equal numbers of genuine and impostor scores, drawn without replacement
/// and shuffled with a seeded stream, as input for [`fold_accuracy`].
pub fn balanced_pairs(scores: &ScoreSet, seed: u64) -> Vec<LabeledScore> {
    let m = scores.genuine.len().min(scores.impostor.len());
    let mut rng = stream(seed, Domain::Pairing, 1, 0);
    let mut pairs: Vec<LabeledScore> = index::sample(&mut rng, scores.genuine.len(), m)
        .into_iter()
        .map(|i| LabeledScore {
            score: scores.genuine[i],
            genuine: true,
        })
        .chain(
            index::sample(&mut rng, scores.impostor.len(), m)
                .into_iter()
                .map(|i| LabeledScore {
                    score: scores.impostor[i],
                    genuine: false,
                }),
        )
        .collect();
    pairs.shuffle(&mut rng);
    pairs
}

/// k-fold verification accuracy in percent.
///
/// Pairs are split into `k` contiguous folds (the first `n mod k` one pair
/// larger). Each fold is scored at the threshold that maximizes accuracy on
/// the other folds.
pub fn fold_accuracy(pairs: &[LabeledScore], k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Input(format!("need at least 2 folds, got {k}")));
    }
    if k > pairs.len() {
        return Err(Error::Input(format!("{k} folds for {} pairs", pairs.len())));
    }
    if pairs.iter().any(|p| p.score.is_nan()) {
        return Err(Error::Input("scores contain NaN".into()));
    }
    let (base, extra) = (pairs.len() / k, pairs.len() % k);
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(0);
    for f in 0..k {
        bounds.push(bounds[f] + base + usize::from(f < extra));
    }
    let mut total = 0.0;
    for f in 0..k {
        let (lo, hi) = (bounds[f], bounds[f + 1]);
        let train: Vec<LabeledScore> = pairs[..lo].iter().chain(&pairs[hi..]).copied().collect();
        let tau = best_threshold(&train);
        total += accuracy_at(&pairs[lo..hi], tau);
    }
    Ok(100.0 * total / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub accuracies: Vec<f64>,
    pub average: f64,
    pub std: f64,
    pub ser: f64,
}

/// Bessel-corrected standard deviation and skewed error ratio
/// `(100 − min)/(100 − max)` of per-group accuracies in percent.
pub fn bias_metrics(accs: &[f64]) -> Result<BiasReport> {
    if accs.len() < 2 {
        return Err(Error::Input(format!("need at least 2 groups, got {}", accs.len())));
    }
    if accs.iter().any(|a| !(0.0..=100.0).contains(a)) {
        return Err(Error::Input("accuracies must be percentages in [0, 100]".into()));
    }
    let n = accs.len() as f64;
    let average = accs.iter().sum::<f64>() / n;
    let std = (accs.iter().map(|a| (a - average).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
    if max >= 100.0 {
        return Err(Error::SerUndefined);
    }
    Ok(BiasReport {
        accuracies: accs.to_vec(),
        average,
        std,
        ser: (100.0 - min) / (100.0 - max),
    })
}

/// Equal-width bin counts over `[lo, hi]`. Bins are left-closed except the
/// last, which also includes `hi`. Out-of-range scores are dropped.
pub fn histogram(scores: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::Input("histogram needs at least one bin".into()));
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::Input(format!("invalid histogram range [{lo}, {hi}]")));
    }
    let mut counts = vec![0usize; bins];
    let width = hi - lo;
    for &s in scores {
        if !(lo..=hi).contains(&s) {
            continue;
        }
        let b = (((s - lo) / width) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    Ok(counts)
}
