//! Keyed random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream addressed by
//! `(seed, domain, a, b)`. ChaCha is a counter-mode generator, so a stream
//! depends only on its key and never on how many draws other streams made.
//! That is what lets sampling chains run in any order (or in parallel) and
//! still produce bit-identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Which part of the pipeline a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    ToyData = 1,
    Init = 2,
    Training = 3,
    Contexts = 4,
    NegativeSelection = 5,
    Chain = 6,
    Pairing = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Opens the stream keyed by `(seed, domain, a, b)`.
///
/// `a` and `b` are the counter coordinates, e.g. identity id and sample index
/// for sampling chains.
pub fn stream(seed: u64, domain: Domain, a: u32, b: u32) -> ChaCha8Rng {
    let k0 = splitmix64(seed ^ splitmix64(domain as u64));
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(k0.wrapping_add(i as u64)).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(((a as u64) << 32) | b as u64);
    rng
}

/// `n` independent standard normal draws.
pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
