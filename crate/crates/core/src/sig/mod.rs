//! Keys, minimal certificates with purpose separation, signature envelopes
//! over canonical bytes, chain verification and counter-signatures.

mod cert;
mod envelope;
mod keys;
pub mod keystore;

pub use cert::{
    issue_cert, self_signed, verify_chain, CertTemplate, ChainError, MiniCert, Purpose, TrustStore,
};
pub use envelope::{
    counter_sign, sign_envelope, verify_envelope, BlockReport, EnvelopeReport, SignatureBlock,
    SignedDoc, Signer,
};
pub use keys::{keygen, PrivateKey, PublicKey, SigAlg};
pub(crate) use envelope::single_content;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SigError {
    #[error("unsupported algorithm `{0}`")]
    UnsupportedAlgorithm(String),
    #[error("issuer certificate `{0}` does not carry the issuer purpose")]
    IssuerNotAuthorized(String),
    #[error("issuer certificate `{0}` is not valid at the issuing time")]
    IssuerExpired(String),
    #[error("private key does not match the certificate public key")]
    KeyCertMismatch,
    #[error("certificate does not allow purpose `{0}`")]
    PurposeMismatch(Purpose),
    #[error("the signed document does not verify")]
    OriginalInvalid,
    #[error("invalid certificate: {0}")]
    InvalidCert(String),
    #[error("malformed signature structure: {0}")]
    Malformed(String),
    #[error("key store: {0}")]
    KeyStore(String),
    #[error("wrong passphrase or corrupted key store")]
    WrongPassphrase,
}

pub(crate) fn b64(data: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(data)
}

pub(crate) fn unb64(s: &str) -> Result<Vec<u8>, SigError> {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD
        .decode(s.trim())
        .map_err(|e| SigError::Malformed(format!("bad base64: {e}")))
}
