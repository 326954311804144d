//! Keyed pseudorandom expansion of the session nonces into register material.

use alloc::vec::Vec;

use hmac::{Hmac, KeyInit, Mac};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::Sha256;

use crate::bits::Bits;
use crate::protocol::{Nonce, SecretKey};

const DOMAIN: &[u8] = b"dbound/registers/v1";

/// A keyed, deterministic function from `(key, N_P, N_V)` to `bits` output bits.
///
/// Implementations must separate the prover and verifier nonces so that
/// swapping them yields unrelated output.
pub trait Prf {
    fn expand(
        &self,
        key: &SecretKey,
        prover_nonce: &Nonce,
        verifier_nonce: &Nonce,
        bits: usize,
    ) -> Bits;
}

/// HMAC-SHA256 in counter mode.
///
/// Block `k` is `HMAC(key, DOMAIN || be32(k) || be32(bits) || be32(|N_P|) || N_P || be32(|N_V|) || N_V)`
/// and blocks are concatenated until `bits` bits are available.
#[derive(Debug, Clone, Copy, Default)]
pub struct HmacSha256Prf;

impl Prf for HmacSha256Prf {
    fn expand(&self, key: &SecretKey, np: &Nonce, nv: &Nonce, bits: usize) -> Bits {
        let np_bytes = np.bits().to_bytes();
        let nv_bytes = nv.bits().to_bytes();
        let mut stream = Vec::with_capacity(bits.div_ceil(8) + 32);
        let mut counter = 0u32;
        while stream.len() * 8 < bits {
            let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(key.as_bytes())
                .expect("HMAC accepts keys of any length");
            mac.update(DOMAIN);
            mac.update(&counter.to_be_bytes());
            mac.update(&(bits as u32).to_be_bytes());
            mac.update(&(np.len() as u32).to_be_bytes());
            mac.update(&np_bytes);
            mac.update(&(nv.len() as u32).to_be_bytes());
            mac.update(&nv_bytes);
            stream.extend_from_slice(&mac.finalize().into_bytes());
            counter += 1;
        }
        Bits::from_bytes(&stream, bits)
    }
}

/// Reproducible stand-in for fixtures: a ChaCha8 stream seeded from an
/// FNV-1a digest of the seed and all inputs. Not a PRF in any cryptographic sense.
#[derive(Debug, Clone, Copy)]
pub struct SeededPrf {
    pub seed: u64,
}

impl SeededPrf {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Prf for SeededPrf {
    fn expand(&self, key: &SecretKey, np: &Nonce, nv: &Nonce, bits: usize) -> Bits {
        let mut h = fnv1a(0xcbf2_9ce4_8422_2325, &self.seed.to_le_bytes());
        h = fnv1a(h, key.as_bytes());
        for nonce in [np, nv] {
            h = fnv1a(h, &(nonce.len() as u64).to_le_bytes());
            h = fnv1a(h, &nonce.bits().to_bytes());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let mut stream = alloc::vec![0u8; bits.div_ceil(8)];
        rng.fill_bytes(&mut stream);
        Bits::from_bytes(&stream, bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nonce(s: &str) -> Nonce {
        Nonce::new(s.parse().unwrap())
    }

    #[test]
    fn output_has_requested_length() {
        let key = SecretKey::new([7u8; 16].to_vec()).unwrap();
        for bits in [1usize, 3, 255, 256, 257, 600] {
            let out = HmacSha256Prf.expand(&key, &nonce("01"), &nonce("10"), bits);
            assert_eq!(out.len(), bits);
        }
    }

    #[test]
    fn nonce_order_matters_for_both_implementations() {
        let key = SecretKey::new(b"0123456789abcdef".to_vec()).unwrap();
        let (a, b) = (nonce("10110"), nonce("01100"));
        assert_ne!(
            HmacSha256Prf.expand(&key, &a, &b, 60),
            HmacSha256Prf.expand(&key, &b, &a, 60)
        );
        let prf = SeededPrf::new(1);
        assert_ne!(prf.expand(&key, &a, &b, 60), prf.expand(&key, &b, &a, 60));
    }

    #[test]
    fn prefix_stable_across_blocks() {
        // The requested length is bound into every block, so different
        // lengths give unrelated streams; equal lengths must agree.
        let key = SecretKey::new([1u8; 32].to_vec()).unwrap();
        let x = HmacSha256Prf.expand(&key, &nonce("1"), &nonce("0"), 300);
        let y = HmacSha256Prf.expand(&key, &nonce("1"), &nonce("0"), 300);
        assert_eq!(x, y);
    }
}
