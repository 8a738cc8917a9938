use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signature, Signer as _, SigningKey, Verifier as _, VerifyingKey};
use rand::rngs::OsRng;

use super::SigError;
use crate::digest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SigAlg {
    #[default]
    Ed25519,
}

impl SigAlg {
    pub fn tag(self) -> &'static str {
        match self {
            SigAlg::Ed25519 => "ed25519",
        }
    }
}

impl fmt::Display for SigAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SigAlg {
    type Err = SigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ed25519" => Ok(SigAlg::Ed25519),
            other => Err(SigError::UnsupportedAlgorithm(other.to_string())),
        }
    }
}

#[derive(Clone)]
pub struct PrivateKey {
    alg: SigAlg,
    inner: SigningKey,
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrivateKey({}, {})", self.alg, self.public_key().key_id())
    }
}

impl PrivateKey {
    /// Deterministic key from a 32-byte seed.
    pub fn from_seed(alg: SigAlg, seed: [u8; 32]) -> Self {
        match alg {
            SigAlg::Ed25519 => PrivateKey {
                alg,
                inner: SigningKey::from_bytes(&seed),
            },
        }
    }

    pub fn from_secret_bytes(alg: SigAlg, bytes: &[u8]) -> Result<Self, SigError> {
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| SigError::KeyStore("bad secret key length".into()))?;
        Ok(Self::from_seed(alg, seed))
    }

    pub fn secret_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes().to_vec()
    }

    pub fn alg(&self) -> SigAlg {
        self.alg
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey {
            alg: self.alg,
            bytes: self.inner.verifying_key().to_bytes().to_vec(),
        }
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.inner.sign(message).to_bytes().to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PublicKey {
    pub alg: SigAlg,
    pub bytes: Vec<u8>,
}

impl PublicKey {
    pub fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        match self.alg {
            SigAlg::Ed25519 => {
                let Ok(raw) = <[u8; 32]>::try_from(self.bytes.as_slice()) else {
                    return false;
                };
                let Ok(key) = VerifyingKey::from_bytes(&raw) else {
                    return false;
                };
                let Ok(sig) = Signature::from_slice(signature) else {
                    return false;
                };
                key.verify(message, &sig).is_ok()
            }
        }
    }

    /// Hex SHA-256 of the raw key bytes. Role map entries and the user map
    /// are keyed by this value.
    pub fn key_id(&self) -> String {
        sha256_hex(&self.bytes)
    }
}

pub fn keygen(alg: SigAlg) -> (PrivateKey, PublicKey) {
    let key = match alg {
        SigAlg::Ed25519 => PrivateKey {
            alg,
            inner: SigningKey::generate(&mut OsRng),
        },
    };
    let public = key.public_key();
    (key, public)
}
