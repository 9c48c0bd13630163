//! Length-preserving keyed stream transform (ChaCha20 keystream XOR).
//! Not an authenticated cipher; there is no nonce.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::KernelError;

pub const KEY_LEN: usize = 32;

fn apply(data: &[u8], key: &[u8]) -> Result<Vec<u8>, KernelError> {
    let key: [u8; KEY_LEN] = key.try_into().map_err(|_| KernelError::KeyLength(key.len()))?;
    let mut stream = ChaCha20Rng::from_seed(key);
    let mut out = vec![0u8; data.len()];
    stream.fill_bytes(&mut out);
    for (o, d) in out.iter_mut().zip(data) {
        *o ^= d;
    }
    Ok(out)
}

pub fn encrypt(data: &[u8], key: &[u8]) -> Result<Vec<u8>, KernelError> {
    apply(data, key)
}

pub fn decrypt(data: &[u8], key: &[u8]) -> Result<Vec<u8>, KernelError> {
    apply(data, key)
}
