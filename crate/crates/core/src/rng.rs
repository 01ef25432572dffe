//! Seeded random streams.
//!
//! Every random draw in the crate comes from [`stream`], which keys a
//! ChaCha20 generator with the 256-bit value
//!
//! ```text
//! seed (u64 LE) || fnv1a64(purpose) (u64 LE) || index (u64 LE) || b"sostnsr1"
//! ```
//!
//! so that distinct `(purpose, index)` pairs derived from one user seed give
//! independent, reproducible streams. Gaussians are drawn with
//! `rand_distr::StandardNormal`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub type Stream = ChaCha20Rng;

const DOMAIN_TAG: &[u8; 8] = b"sostnsr1";

/// 64-bit FNV-1a hash of a purpose label.
pub fn fnv1a64(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: &str, index: u64) -> Stream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a64(purpose).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(DOMAIN_TAG);
    ChaCha20Rng::from_seed(key)
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform point on the unit sphere in `R^dim` (normalized Gaussian).
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let g = gaussian_vector(rng, dim);
        let norm = g.norm();
        if norm > 1e-300 {
            return g / norm;
        }
    }
}

/// Rademacher signs as `±1.0`.
pub fn signs<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}
