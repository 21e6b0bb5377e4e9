//! On-disk formats.
//!
//! Vector files (`NFD1`), all little-endian:
//!
//! ```text
//! magic    4 bytes  "NFD1"
//! N        u32      identities
//! K        u32      samples per identity
//! d        u32      vector dimension
//! source   u8       0 toy data, 1 baseline, 2 close-neg, 3 rand-neg,
//!                   4 mid-neg, 5 far-neg, 6 null
//! mode     u8       0 none, 1 ddpm, 2 ddim
//! reserved u16      0
//! steps    u32      sampler steps (0 when mode is none)
//! w        f64      guidance weight
//! seed     u64
//! payload  N·K·d × f32, ordered by (identity, sample index)
//! ```
//!
//! Checkpoints (`NFDC`) store the architecture, the schedule and every
//! parameter as f64.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};

use negdiff_core::{
    DatasetHeader, Denoiser, DenoiserConfig, GeneratedDataset, Layer, MetricsReport, NegativeAssignment,
    NegativeSource, Provenance, SamplerMode, Schedule, Strategy,
};

pub const DATASET_MAGIC: &[u8; 4] = b"NFD1";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NFDC";
const CHECKPOINT_VERSION: u32 = 1;
const DATASET_HEADER_LEN: usize = 4 + 4 * 3 + 1 + 1 + 2 + 4 + 8 + 8;

fn provenance_code(p: Provenance) -> u8 {
    match p {
        Provenance::ToyData => 0,
        Provenance::Baseline => 1,
        Provenance::Guided(Strategy::CloseNeg) => 2,
        Provenance::Guided(Strategy::RandNeg) => 3,
        Provenance::Guided(Strategy::MidNeg) => 4,
        Provenance::Guided(Strategy::FarNeg) => 5,
        Provenance::Guided(Strategy::Null) => 6,
    }
}

fn provenance_from_code(c: u8) -> Result<Provenance> {
    Ok(match c {
        0 => Provenance::ToyData,
        1 => Provenance::Baseline,
        2 => Provenance::Guided(Strategy::CloseNeg),
        3 => Provenance::Guided(Strategy::RandNeg),
        4 => Provenance::Guided(Strategy::MidNeg),
        5 => Provenance::Guided(Strategy::FarNeg),
        6 => Provenance::Guided(Strategy::Null),
        _ => bail!("unknown source code {c}"),
    })
}

fn u32_of(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).with_context(|| format!("{what} {n} does not fit in 32 bits"))
}

pub fn encode_dataset(ds: &GeneratedDataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let h = &ds.header;
    let mut buf = Vec::with_capacity(DATASET_HEADER_LEN + 4 * ds.record_count() * h.dim);
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&u32_of(h.identities, "identity count")?.to_le_bytes());
    buf.extend_from_slice(&u32_of(h.samples_per_identity, "samples per identity")?.to_le_bytes());
    buf.extend_from_slice(&u32_of(h.dim, "dimension")?.to_le_bytes());
    buf.push(provenance_code(h.provenance));
    let (mode, steps) = match h.sampler {
        None => (0u8, 0usize),
        Some((SamplerMode::Ddpm, s)) => (1, s),
        Some((SamplerMode::Ddim, s)) => (2, s),
    };
    buf.push(mode);
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&u32_of(steps, "sampler steps")?.to_le_bytes());
    buf.extend_from_slice(&h.guidance_w.to_le_bytes());
    buf.extend_from_slice(&h.seed.to_le_bytes());
    for row in ds.rows() {
        for &v in row {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        ensure!(self.pos + N <= self.bytes.len(), "truncated file at byte {}", self.pos);
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<GeneratedDataset> {
    let mut r = Reader { bytes, pos: 0 };
    ensure!(&r.take::<4>()? == DATASET_MAGIC, "not a vector file (bad magic)");
    let n = r.u32()? as usize;
    let k = r.u32()? as usize;
    let d = r.u32()? as usize;
    let provenance = provenance_from_code(r.u8()?)?;
    let mode = r.u8()?;
    ensure!(r.u16()? == 0, "reserved header bytes must be zero");
    let steps = r.u32()? as usize;
    let sampler = match mode {
        0 => None,
        1 => Some((SamplerMode::Ddpm, steps)),
        2 => Some((SamplerMode::Ddim, steps)),
        _ => bail!("unknown sampler mode code {mode}"),
    };
    let guidance_w = r.f64()?;
    let seed = r.u64()?;
    let expected = n
        .checked_mul(k)
        .and_then(|v| v.checked_mul(d))
        .and_then(|v| v.checked_mul(4))
        .context("header counts overflow")?;
    ensure!(
        r.remaining() == expected,
        "payload is {} bytes, header implies {expected}",
        r.remaining()
    );
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let mut g = Vec::with_capacity(k);
        for _ in 0..k {
            let v = (0..d).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
            ensure!(v.iter().all(|x| x.is_finite()), "non-finite vector entry");
            g.push(v);
        }
        groups.push(g);
    }
    let header = DatasetHeader {
        identities: n,
        samples_per_identity: k,
        dim: d,
        provenance,
        guidance_w,
        sampler,
        seed,
    };
    Ok(GeneratedDataset::new(header, groups)?)
}

pub fn write_dataset(path: &Path, ds: &GeneratedDataset) -> Result<()> {
    std::fs::write(path, encode_dataset(ds)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_dataset(path: &Path) -> Result<GeneratedDataset> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_dataset(&bytes).with_context(|| format!("malformed vector file {}", path.display()))
}

pub fn encode_checkpoint(model: &Denoiser, schedule: &Schedule) -> Result<Vec<u8>> {
    ensure!(
        model.max_step() == schedule.steps(),
        "model and schedule step counts differ"
    );
    let cfg = model.config();
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [cfg.data_dim, cfg.cond_dim, cfg.time_dim, cfg.hidden.len()] {
        buf.extend_from_slice(&u32_of(v, "dimension")?.to_le_bytes());
    }
    for &h in &cfg.hidden {
        buf.extend_from_slice(&u32_of(h, "hidden width")?.to_le_bytes());
    }
    buf.extend_from_slice(&u32_of(schedule.steps(), "schedule steps")?.to_le_bytes());
    buf.extend_from_slice(&schedule.beta_start().to_le_bytes());
    buf.extend_from_slice(&schedule.beta_end().to_le_bytes());
    for layer in model.layers() {
        for v in layer.weights.iter().chain(&layer.bias) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Denoiser, Schedule)> {
    let mut r = Reader { bytes, pos: 0 };
    ensure!(&r.take::<4>()? == CHECKPOINT_MAGIC, "not a checkpoint (bad magic)");
    let version = r.u32()?;
    ensure!(
        version == CHECKPOINT_VERSION,
        "unsupported checkpoint version {version}"
    );
    let data_dim = r.u32()? as usize;
    let cond_dim = r.u32()? as usize;
    let time_dim = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    ensure!(n_hidden <= 64, "implausible hidden layer count {n_hidden}");
    let hidden = (0..n_hidden)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let steps = r.u32()? as usize;
    let beta_start = r.f64()?;
    let beta_end = r.f64()?;
    let schedule = Schedule::linear(steps, beta_start, beta_end)?;
    let config = DenoiserConfig {
        data_dim,
        cond_dim,
        time_dim,
        hidden,
    };
    config.validate()?;
    let widths = config.widths();
    let expected: usize = widths.windows(2).map(|w| 8 * (w[0] * w[1] + w[1])).sum();
    ensure!(
        r.remaining() == expected,
        "parameter block is {} bytes, architecture implies {expected}",
        r.remaining()
    );
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for w in widths.windows(2) {
        let weights = (0..w[0] * w[1]).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let bias = (0..w[1]).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        layers.push(Layer {
            in_dim: w[0],
            out_dim: w[1],
            weights,
            bias,
        });
    }
    let model = Denoiser::from_layers(config, steps, layers)?;
    Ok((model, schedule))
}

pub fn write_checkpoint(path: &Path, model: &Denoiser, schedule: &Schedule) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model, schedule)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_checkpoint(path: &Path) -> Result<(Denoiser, Schedule)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    decode_checkpoint(&bytes).with_context(|| format!("invalid checkpoint {}", path.display()))
}

/// `positive_id <TAB> strategy <TAB> negative_id_or_NULL`, one line each.
pub fn format_manifest(assignment: &NegativeAssignment) -> String {
    let mut out = String::new();
    for p in &assignment.pairs {
        let neg = match p.source {
            NegativeSource::Context(id) => id.to_string(),
            NegativeSource::Null => "NULL".to_string(),
        };
        writeln!(out, "{}\t{}\t{}", p.positive_id, assignment.strategy, neg).unwrap();
    }
    out
}

/// Fixed six-decimal formatting used by every text table.
pub fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

pub fn format_metrics(report: &MetricsReport, accuracy: Option<f64>) -> String {
    let mut rows: Vec<(&str, String)> = vec![
        ("eer", fixed(report.eer)),
        ("eer_threshold", fixed(report.eer_threshold)),
        ("fmr100", fixed(report.fmr100.fnmr)),
        ("fmr100_threshold", fixed(report.fmr100.threshold)),
        ("fmr1000", fixed(report.fmr1000.fnmr)),
        ("fmr1000_threshold", fixed(report.fmr1000.threshold)),
        ("g_mean", fixed(report.stats.g_mean)),
        ("g_std", fixed(report.stats.g_std)),
        ("i_mean", fixed(report.stats.i_mean)),
        ("i_std", fixed(report.stats.i_std)),
        ("fdr", fixed(report.fdr)),
        ("genuine_pairs", report.genuine_count.to_string()),
        ("impostor_pairs", report.impostor_count.to_string()),
    ];
    if let Some(acc) = accuracy {
        rows.push(("verification_accuracy", fixed(acc)));
    }
    let mut out = String::from("metric,value\n");
    for (k, v) in rows {
        writeln!(out, "{k},{v}").unwrap();
    }
    out
}

pub fn format_histogram(lo: f64, hi: f64, genuine: &[usize], impostor: &[usize]) -> String {
    let bins = genuine.len();
    let width = (hi - lo) / bins as f64;
    let mut out = String::from("bin_lo,bin_hi,genuine,impostor\n");
    for b in 0..bins {
        let a = lo + width * b as f64;
        let z = if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 };
        writeln!(out, "{},{},{},{}", fixed(a), fixed(z), genuine[b], impostor[b]).unwrap();
    }
    out
}
