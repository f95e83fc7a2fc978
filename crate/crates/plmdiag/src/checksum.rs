use sha2::{Digest, Sha256};

/// First eight bytes of the SHA-256 digest, big-endian.
pub fn checksum64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_be_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub fn hex64(v: u64) -> String {
    format!("{v:016x}")
}
