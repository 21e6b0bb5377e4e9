//! In-memory form of a set of per-identity sample vectors.

use std::fmt;

use crate::contexts::Strategy;
use crate::error::{Error, Result};
use crate::sampler::SamplerMode;

/// How the vectors of a [`GeneratedDataset`] were produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    /// Toy training data, not sampled from a model.
    ToyData,
    /// Positive-only conditioning.
    Baseline,
    /// Positive plus negative conditioning.
    Guided(Strategy),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::ToyData => f.write_str("toy-data"),
            Provenance::Baseline => f.write_str("baseline"),
            Provenance::Guided(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub identities: usize,
    pub samples_per_identity: usize,
    pub dim: usize,
    pub provenance: Provenance,
    pub guidance_w: f64,
    pub sampler: Option<(SamplerMode, usize)>,
    pub seed: u64,
}

/// `N` identities × `K` vectors, ordered by `(identity, sample index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub header: DatasetHeader,
    pub groups: Vec<Vec<Vec<f64>>>,
}

impl GeneratedDataset {
    pub fn new(header: DatasetHeader, groups: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let ds = Self { header, groups };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if self.groups.len() != h.identities {
            return Err(Error::Input(format!(
                "header declares {} identities, found {}",
                h.identities,
                self.groups.len()
            )));
        }
        for g in &self.groups {
            if g.len() != h.samples_per_identity {
                return Err(Error::Input(format!(
                    "header declares {} samples per identity, found {}",
                    h.samples_per_identity,
                    g.len()
                )));
            }
            if let Some(v) = g.iter().find(|v| v.len() != h.dim) {
                return Err(Error::Input(format!(
                    "header declares dimension {}, found a vector of length {}",
                    h.dim,
                    v.len()
                )));
            }
        }
        Ok(())
    }

    pub fn record_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// All vectors in storage order.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.groups.iter().flatten().map(Vec::as_slice)
    }
}
