//! Counter-based random streams keyed by (master seed, replica, role).
//!
//! Every replica owns one independent ChaCha8 stream per role. The key holds
//! the master seed and the role, the 64-bit ChaCha stream id holds the replica
//! index, so a replica's draws never depend on how replicas are scheduled.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const DOMAIN_TAG: u64 = 0x7277_7273_2d76_3031; // "rwrs-v01"

/// What a stream is used for. Distinct roles never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamRole {
    Walk = 1,
    Scenery = 2,
    Environment = 3,
    Moves = 4,
    Limit = 5,
    Aux = 6,
}

pub fn stream(seed: u64, replica: u64, role: StreamRole) -> StreamRng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(role as u64).to_le_bytes());
    key[16..24].copy_from_slice(&DOMAIN_TAG.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}

/// Derives a child master seed, used to split one run into disjoint batches.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    stream(seed, label, StreamRole::Aux).next_u64()
}

/// Uniform on [0, 1) with 53 bits of resolution.
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn open_unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn coin<R: RngCore + ?Sized>(rng: &mut R) -> bool {
    rng.next_u32() >> 31 == 1
}

/// Threshold for a Bernoulli(p) draw against a raw `u32`.
#[inline]
pub(crate) fn u32_threshold(p: f64) -> u64 {
    (p * 4_294_967_296.0).round() as u64
}
