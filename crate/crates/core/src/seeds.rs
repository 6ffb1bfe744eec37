//! Named sub-seeds derived from one global seed.

use sha2::{Digest, Sha256};

/// First 8 bytes (little endian) of `sha256(global_le ‖ name)` with the top
/// bit cleared, so every seed also fits a signed TOML integer.
pub fn sub_seed(global: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes")) & (u64::MAX >> 1)
}
