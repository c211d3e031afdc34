//! Deterministic, splittable random streams.
//!
//! Every stochastic quantity in the simulator is drawn from a ChaCha stream
//! keyed by `(master seed, frame index, role)`. The key is hashed with
//! SHA-256 into the 32-byte ChaCha seed, so channel realizations, noise, and
//! payload bits are mutually independent streams and results do not depend
//! on call interleaving or scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// What a derived stream is used for. Each role gets its own substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Rayleigh channel matrix entries.
    Channel,
    /// AWGN at the receiver.
    Noise,
    /// Payload bits for Monte Carlo frames.
    Data,
    /// Weight initialization and synthetic tensors.
    Init,
}

impl Role {
    fn tag(self) -> u8 {
        match self {
            Role::Channel => 0,
            Role::Noise => 1,
            Role::Data => 2,
            Role::Init => 3,
        }
    }
}

/// Derive an independent RNG from `(master, frame, role)`.
pub fn derive_rng(master: u64, frame: u64, role: Role) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"mimolink.rng.v1");
    hasher.update(master.to_le_bytes());
    hasher.update(frame.to_le_bytes());
    hasher.update([role.tag()]);
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}

/// Derive an RNG from `(master, label)` for named substreams such as
/// per-tensor weight initialization.
pub fn derive_rng_labeled(master: u64, label: &str) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"mimolink.rng.label.v1");
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}
