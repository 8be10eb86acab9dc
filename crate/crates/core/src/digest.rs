use sha2::{Digest, Sha256};

/// Short hex fingerprint of a canonical parameter rendering.
///
/// Sixteen hex digits (64 bits) of SHA-256.
pub fn config_digest(canonical: &str) -> String {
    let hash = Sha256::digest(canonical.as_bytes());
    hex::encode(&hash[..8])
}
