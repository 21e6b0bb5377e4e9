//! Positive identity contexts and the negative-context selection strategies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::rng::gaussian_vec;
use crate::toyworld::extract_feature;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityContext {
    pub id: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    CloseNeg,
    RandNeg,
    MidNeg,
    FarNeg,
    Null,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::CloseNeg,
        Strategy::RandNeg,
        Strategy::MidNeg,
        Strategy::FarNeg,
        Strategy::Null,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::CloseNeg => "close-neg",
            Strategy::RandNeg => "rand-neg",
            Strategy::MidNeg => "mid-neg",
            Strategy::FarNeg => "far-neg",
            Strategy::Null => "null",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm || st.name().replace('-', "") == norm)
            .ok_or_else(|| Error::Input(format!("unknown negative strategy `{s}`")))
    }
}

/// Where a positive context's negative comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum NegativeSource {
    /// Another positive context, by id.
    Context(usize),
    /// The all-zeros vector.
    Null,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativePair {
    pub positive_id: usize,
    pub source: NegativeSource,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeAssignment {
    pub strategy: Strategy,
    /// One entry per positive context, in input order.
    pub pairs: Vec<NegativePair>,
}

impl NegativeAssignment {
    pub fn negative_for(&self, positive_id: usize) -> Option<&[f64]> {
        self.pairs
            .iter()
            .find(|p| p.positive_id == positive_id)
            .map(|p| p.vector.as_slice())
    }
}

/// `n` contexts with standard-normal entries, optionally L2-normalized.
pub fn draw_contexts<R: Rng + ?Sized>(
    n: usize,
    cond_dim: usize,
    rng: &mut R,
    normalize: bool,
) -> Result<Vec<IdentityContext>> {
    if n < 1 {
        return Err(Error::Input("need at least one context".into()));
    }
    if cond_dim == 0 {
        return Err(Error::Input("context dimension must be positive".into()));
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = gaussian_vec(rng, cond_dim);
        let vector = if normalize {
            match extract_feature(&v) {
                Ok(u) => u,
                // measure-zero event; redraw
                Err(_) => continue,
            }
        } else {
            v
        };
        out.push(IdentityContext { id: out.len(), vector });
    }
    Ok(out)
}

/// Euclidean distance between `a/‖a‖` and `b/‖b‖`, in `[0, 2]`.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("distance operand", a.len(), b.len())?;
    let ua = extract_feature(a)?;
    let ub = extract_feature(b)?;
    Ok(ua.iter().zip(&ub).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Candidates other than `i`, sorted by ascending distance then by id.
fn ranked_candidates(units: &[Vec<f64>], i: usize) -> Vec<(f64, usize)> {
    let mut cand: Vec<(f64, usize)> = units
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, u)| {
            let d = u
                .iter()
                .zip(&units[i])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            (d, j)
        })
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand
}

/// Assigns a negative context to every positive context.
///
/// Ties in distance go to the candidate listed first. `rng` is consulted
/// only (and must be present) for [`Strategy::RandNeg`].
pub fn select_negatives<R: Rng + ?Sized>(
    contexts: &[IdentityContext],
    strategy: Strategy,
    rng: Option<&mut R>,
) -> Result<NegativeAssignment> {
    let dim = contexts.first().map_or(0, |c| c.vector.len());
    for c in contexts {
        check_len("context vector", dim, c.vector.len())?;
    }
    if strategy == Strategy::Null {
        let pairs = contexts
            .iter()
            .map(|c| NegativePair {
                positive_id: c.id,
                source: NegativeSource::Null,
                vector: vec![0.0; dim],
            })
            .collect();
        return Ok(NegativeAssignment { strategy, pairs });
    }
    let n = contexts.len();
    if n < 2 {
        return Err(Error::InsufficientContexts(n));
    }
    let mut rng = match (strategy, rng) {
        (Strategy::RandNeg, None) => {
            return Err(Error::Input("random negative selection needs a random stream".into()))
        }
        (_, r) => r,
    };
    let units = contexts
        .iter()
        .map(|c| extract_feature(&c.vector))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let chosen = match strategy {
            Strategy::RandNeg => {
                let r = rng.as_deref_mut().expect("checked above");
                let k = r.random_range(0..n - 1);
                if k >= i {
                    k + 1
                } else {
                    k
                }
            }
            _ => {
                let ranked = ranked_candidates(&units, i);
                match strategy {
                    Strategy::CloseNeg => ranked[0].1,
                    Strategy::MidNeg => ranked[(n - 2) / 2].1,
                    Strategy::FarNeg => {
                        // largest distance, smallest index among ties
                        let max = ranked[n - 2].0;
                        ranked.iter().find(|c| c.0 == max).expect("non-empty").1
                    }
                    Strategy::RandNeg | Strategy::Null => unreachable!(),
                }
            }
        };
        pairs.push(NegativePair {
            positive_id: contexts[i].id,
            source: NegativeSource::Context(contexts[chosen].id),
            vector: contexts[chosen].vector.clone(),
        });
    }
    Ok(NegativeAssignment { strategy, pairs })
}
