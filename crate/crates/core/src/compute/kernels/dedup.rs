//! Fixed-size chunk deduplication: returns the SHA-256 digest of each
//! distinct 4 KiB chunk, in first-occurrence order.

use std::collections::HashSet;

use sha2::{Digest, Sha256};

pub const CHUNK: usize = 4096;

pub fn dedup(input: &[u8]) -> Vec<u8> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for chunk in input.chunks(CHUNK) {
        let digest: [u8; 32] = Sha256::digest(chunk).into();
        if seen.insert(digest) {
            out.extend_from_slice(&digest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_chunks_collapse() {
        let mut input = vec![1u8; CHUNK * 3];
        input.extend(vec![2u8; CHUNK]);
        assert_eq!(dedup(&input).len(), 64);
        assert!(dedup(&[]).is_empty());
    }
}
