//! Key-derived XOR stream for whitening a payload before hiding it.
//!
//! The stream is SHA-256 in counter mode over the key. This is plumbing to
//! make arbitrary files look like coin flips; it is not a vetted cipher and
//! makes no confidentiality claim.

use sha2::{Digest, Sha256};

use crate::bits::BitString;

use super::CodecError;

fn keystream_block(key: &[u8], counter: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(key);
    h.update(counter.to_be_bytes());
    h.finalize().into()
}

/// XORs `data` with the key stream. Applying it twice restores `data`.
pub fn keystream_xor(data: &BitString, key: &[u8]) -> Result<BitString, CodecError> {
    if key.is_empty() {
        return Err(CodecError::EmptyKey);
    }
    let mut block = [0u8; 32];
    let out = data
        .iter()
        .enumerate()
        .map(|(i, bit)| {
            let byte = i / 8;
            if byte % 32 == 0 && i % 8 == 0 {
                block = keystream_block(key, (byte / 32) as u64);
            }
            let k = block[byte % 32] >> (7 - i % 8) & 1 == 1;
            bit ^ k
        })
        .collect();
    Ok(out)
}
