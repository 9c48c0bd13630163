//! Raw DEFLATE streams (no zlib/gzip wrapper).

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::error::KernelError;

pub fn compress(input: &[u8]) -> Vec<u8> {
    let mut enc = DeflateEncoder::new(Vec::with_capacity(input.len() / 2 + 64), Compression::default());
    enc.write_all(input).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

pub fn decompress(input: &[u8]) -> Result<Vec<u8>, KernelError> {
    let mut out = Vec::with_capacity(input.len() * 3);
    DeflateDecoder::new(input)
        .read_to_end(&mut out)
        .map_err(|e| KernelError::CorruptStream(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn empty_roundtrip() {
        let c = compress(&[]);
        assert!(!c.is_empty(), "an empty stream still has a final block");
        assert_eq!(decompress(&c).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn repeated_byte_collapses() {
        let input = vec![b'z'; 1 << 20];
        let c = compress(&input);
        // the encoder emits ~1 KiB for this input (recorded: 1029 bytes)
        assert!(c.len() * 100 < input.len(), "compressed to {} bytes", c.len());
        assert_eq!(decompress(&c).unwrap(), input);
    }

    #[test]
    fn seeded_text_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(64);
        let words = ["data", "page", "dpu", "offload", "the", "of", "compress", "ring"];
        let mut text = Vec::new();
        while text.len() < 64 * 1024 {
            text.extend_from_slice(words[rng.gen_range(0..words.len())].as_bytes());
            text.push(b' ');
        }
        text.truncate(64 * 1024);
        let c = compress(&text);
        assert!(c.len() < text.len() / 2);
        assert_eq!(decompress(&c).unwrap(), text);
    }

    #[test]
    fn corrupt_stream_is_reported() {
        assert!(matches!(decompress(&[0xff, 0xff, 0xff]), Err(KernelError::CorruptStream(_))));
    }
}
