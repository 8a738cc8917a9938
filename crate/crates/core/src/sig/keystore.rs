//! Passphrase-protected private key files.
//!
//! Layout (all integers big-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "EDKS"
//! 4       1     format version (1)
//! 5       1     KDF id (1 = PBKDF2-HMAC-SHA256)
//! 6       4     KDF iteration count
//! 10      16    salt
//! 26      12    ChaCha20-Poly1305 nonce
//! 38      1     algorithm tag length n
//! 39      n     algorithm tag, ASCII (e.g. "ed25519")
//! 39+n    ..    ciphertext of the secret key followed by the 16-byte tag
//! ```
//!
//! Bytes `0..39+n` are authenticated as associated data.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::RngCore;
use sha2::Sha256;

use super::keys::{PrivateKey, SigAlg};
use super::SigError;

pub const MAGIC: &[u8; 4] = b"EDKS";
pub const VERSION: u8 = 1;
const KDF_PBKDF2_SHA256: u8 = 1;
pub const DEFAULT_ITERATIONS: u32 = 100_000;
const SALT_LEN: usize = 16;
const NONCE_LEN: usize = 12;
const HEADER_FIXED: usize = 4 + 1 + 1 + 4 + SALT_LEN + NONCE_LEN;

fn derive(passphrase: &str, salt: &[u8], iterations: u32) -> Key {
    let mut out = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(passphrase.as_bytes(), salt, iterations, &mut out);
    Key::from(out)
}

/// Encrypts `key` under `passphrase`.
pub fn seal(key: &PrivateKey, passphrase: &str, iterations: u32) -> Result<Vec<u8>, SigError> {
    if passphrase.is_empty() {
        return Err(SigError::KeyStore("empty passphrase".into()));
    }
    if iterations == 0 {
        return Err(SigError::KeyStore("iteration count must be positive".into()));
    }
    let mut salt = [0u8; SALT_LEN];
    let mut nonce = [0u8; NONCE_LEN];
    rand::thread_rng().fill_bytes(&mut salt);
    rand::thread_rng().fill_bytes(&mut nonce);
    let tag = key.alg().tag().as_bytes();

    let mut out = Vec::with_capacity(HEADER_FIXED + 1 + tag.len() + 48);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(KDF_PBKDF2_SHA256);
    out.extend_from_slice(&iterations.to_be_bytes());
    out.extend_from_slice(&salt);
    out.extend_from_slice(&nonce);
    out.push(tag.len() as u8);
    out.extend_from_slice(tag);

    let cipher = ChaCha20Poly1305::new(&derive(passphrase, &salt, iterations));
    let secret = key.secret_bytes();
    let ct = cipher
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: &secret,
                aad: &out,
            },
        )
        .map_err(|_| SigError::KeyStore("encryption failed".into()))?;
    out.extend_from_slice(&ct);
    Ok(out)
}

/// Decrypts a key store file.
pub fn open(bytes: &[u8], passphrase: &str) -> Result<PrivateKey, SigError> {
    let bad = |m: &str| SigError::KeyStore(m.to_string());
    if bytes.len() < HEADER_FIXED + 1 || &bytes[..4] != MAGIC {
        return Err(bad("not a key store file"));
    }
    if bytes[4] != VERSION {
        return Err(bad(&format!("unsupported key store version {}", bytes[4])));
    }
    if bytes[5] != KDF_PBKDF2_SHA256 {
        return Err(bad("unsupported key derivation"));
    }
    let iterations = u32::from_be_bytes(bytes[6..10].try_into().unwrap());
    let salt = &bytes[10..10 + SALT_LEN];
    let nonce = &bytes[10 + SALT_LEN..HEADER_FIXED];
    let tag_len = bytes[HEADER_FIXED] as usize;
    let header_end = HEADER_FIXED + 1 + tag_len;
    if bytes.len() < header_end + 16 {
        return Err(bad("truncated key store"));
    }
    let tag = std::str::from_utf8(&bytes[HEADER_FIXED + 1..header_end])
        .map_err(|_| bad("bad algorithm tag"))?;
    let alg: SigAlg = tag.parse()?;
    let cipher = ChaCha20Poly1305::new(&derive(passphrase, salt, iterations));
    let secret = cipher
        .decrypt(
            Nonce::from_slice(nonce),
            Payload {
                msg: &bytes[header_end..],
                aad: &bytes[..header_end],
            },
        )
        .map_err(|_| SigError::WrongPassphrase)?;
    PrivateKey::from_secret_bytes(alg, &secret)
}
