//! Synthetic identity clusters on the unit sphere, plus the oracle feature
//! extractor that stands in for a face-recognition embedding.

use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, stream, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub identities: usize,
    pub samples_per_id: usize,
    pub dim: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            identities: 200,
            samples_per_id: 32,
            dim: 16,
            noise_scale: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySample {
    pub label: usize,
    pub x0: Vec<f64>,
}

/// Training data: unit prototypes and noisy samples ordered by
/// `(label, sample index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub prototypes: Vec<Vec<f64>>,
    pub samples: Vec<ToySample>,
    pub noise_scale: f64,
    pub seed: u64,
}

impl ToyDataset {
    pub fn dim(&self) -> usize {
        self.prototypes.first().map_or(0, Vec::len)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x / ‖x‖`.
pub fn extract_feature(x: &[f64]) -> Result<Vec<f64>> {
    let n = norm(x);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Normalization);
    }
    Ok(x.iter().map(|v| v / n).collect())
}

/// Prototypes are normalized Gaussian draws; each sample adds isotropic noise
/// of scale `noise_scale`. Identity `k` draws from its own stream, so the
/// result does not depend on generation order.
pub fn make_dataset(config: &ToyConfig) -> Result<ToyDataset> {
    if config.dim < 2 {
        return Err(Error::Input(format!(
            "dimension must be at least 2, got {}",
            config.dim
        )));
    }
    if config.identities < 2 {
        return Err(Error::Input(format!(
            "need at least 2 identities, got {}",
            config.identities
        )));
    }
    if config.samples_per_id < 1 {
        return Err(Error::Input("need at least 1 sample per identity".into()));
    }
    if !(config.noise_scale >= 0.0 && config.noise_scale.is_finite()) {
        return Err(Error::Input("noise scale must be finite and non-negative".into()));
    }
    let mut prototypes = Vec::with_capacity(config.identities);
    let mut samples = Vec::with_capacity(config.identities * config.samples_per_id);
    for k in 0..config.identities {
        let mut rng = stream(config.seed, Domain::ToyData, k as u32, 0);
        let proto = loop {
            if let Ok(p) = extract_feature(&gaussian_vec(&mut rng, config.dim)) {
                break p;
            }
        };
        for _ in 0..config.samples_per_id {
            let g = gaussian_vec(&mut rng, config.dim);
            let x0 = proto.iter().zip(&g).map(|(p, n)| p + config.noise_scale * n).collect();
            samples.push(ToySample { label: k, x0 });
        }
        prototypes.push(proto);
    }
    Ok(ToyDataset {
        prototypes,
        samples,
        noise_scale: config.noise_scale,
        seed: config.seed,
    })
}

/// Nearest-prototype classification accuracy by cosine similarity.
pub fn nearest_prototype_accuracy(data: &ToyDataset) -> f64 {
    let correct = data
        .samples
        .iter()
        .filter(|s| {
            let best = data
                .prototypes
                .iter()
                .enumerate()
                .map(|(k, p)| (k, dot(p, &s.x0) / norm(&s.x0)))
                .fold(
                    (usize::MAX, f64::NEG_INFINITY),
                    |acc, (k, c)| if c > acc.1 { (k, c) } else { acc },
                );
            best.0 == s.label
        })
        .count();
    correct as f64 / data.samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_reproduces_prototypes() {
        let d = make_dataset(&ToyConfig {
            identities: 4,
            samples_per_id: 3,
            dim: 5,
            noise_scale: 0.0,
            seed: 9,
        })
        .unwrap();
        for s in &d.samples {
            assert_eq!(s.x0, d.prototypes[s.label]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let c = ToyConfig {
            identities: 5,
            ..ToyConfig::default()
        };
        assert_eq!(make_dataset(&c).unwrap(), make_dataset(&c).unwrap());
        let other = ToyConfig { seed: 1, ..c.clone() };
        assert_ne!(make_dataset(&c).unwrap(), make_dataset(&other).unwrap());
    }

    #[test]
    fn layout_and_invariants() {
        let d = make_dataset(&ToyConfig::default()).unwrap();
        assert_eq!(d.samples.len(), 200 * 32);
        for (i, s) in d.samples.iter().enumerate() {
            assert_eq!(s.label, i / 32);
            assert!(s.x0.iter().all(|v| v.is_finite()));
        }
        for p in &d.prototypes {
            assert!((norm(p) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn within_class_spread_matches_chi_mean() {
        let d = make_dataset(&ToyConfig::default()).unwrap();
        let mean: f64 = d
            .samples
            .iter()
            .map(|s| {
                let diff: Vec<f64> = s.x0.iter().zip(&d.prototypes[s.label]).map(|(a, b)| a - b).collect();
                norm(&diff)
            })
            .sum::<f64>()
            / d.samples.len() as f64;
        // noise_scale * sqrt(d) = 0.2; the chi mean is slightly below.
        assert!((mean - 0.2).abs() < 0.02, "{mean}");
    }

    #[test]
    fn default_dataset_is_separable() {
        let d = make_dataset(&ToyConfig::default()).unwrap();
        assert!(nearest_prototype_accuracy(&d) >= 0.99);
    }

    #[test]
    fn rejects_bad_inputs() {
        let base = ToyConfig::default();
        assert!(make_dataset(&ToyConfig { dim: 1, ..base.clone() }).is_err());
        assert!(make_dataset(&ToyConfig {
            identities: 1,
            ..base.clone()
        })
        .is_err());
        assert!(make_dataset(&ToyConfig {
            samples_per_id: 0,
            ..base
        })
        .is_err());
    }

    #[test]
    fn feature_extraction() {
        let mut x = vec![0.0; 16];
        x[0] = 3.0;
        let f = extract_feature(&x).unwrap();
        assert_eq!(f[0], 1.0);
        assert!(f[1..].iter().all(|&v| v == 0.0));

        let u = extract_feature(&[0.6, 0.8]).unwrap();
        assert!((u[0] - 0.6).abs() < 1e-12 && (u[1] - 0.8).abs() < 1e-12);

        let y = [0.3, -1.2, 0.7];
        let scaled: Vec<f64> = y.iter().map(|v| v * 4.5).collect();
        let (a, b) = (extract_feature(&y).unwrap(), extract_feature(&scaled).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-15);
        }
        assert_eq!(extract_feature(&[0.0, 0.0]), Err(Error::Normalization));
    }
}
