use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

/// Deflate level used for the entropy score.
pub const DEFLATE_LEVEL: u32 = 6;

/// Length of the raw deflate stream of `bytes` at [`DEFLATE_LEVEL`].
pub fn compressed_size(bytes: &[u8]) -> usize {
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(DEFLATE_LEVEL));
    enc.write_all(bytes).expect("writing to memory");
    enc.finish().expect("writing to memory").len()
}

/// `(S_gen / S_real - 1)^2` with `S` the compressed size of the canonical
/// serialization (see [`crate::data::canonical_bytes`]).
pub fn entropy_error(real: &[u8], generated: &[u8]) -> Result<f64> {
    if real.is_empty() || generated.is_empty() {
        return Err(Error::Usage("entropy error needs two nonempty datasets".into()));
    }
    Ok(entropy_error_from_sizes(compressed_size(real), compressed_size(generated)))
}

pub fn entropy_error_from_sizes(real: usize, generated: usize) -> f64 {
    let r = generated as f64 / real as f64 - 1.0;
    r * r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_data_is_zero_and_constant_data_is_penalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let diverse: Vec<u8> = (0..5000).map(|_| rng.random_range(0..2)).collect();
        assert_eq!(entropy_error(&diverse, &diverse).unwrap(), 0.0);
        let constant: Vec<u8> = diverse[..50].iter().copied().cycle().take(5000).collect();
        assert!(compressed_size(&constant) < compressed_size(&diverse));
        assert!(entropy_error(&diverse, &constant).unwrap() > 0.0);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(entropy_error(&[], &[1]).is_err());
    }
}
