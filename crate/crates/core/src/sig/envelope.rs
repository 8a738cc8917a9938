use std::collections::BTreeMap;

use super::cert::{verify_chain, ChainError, MiniCert, Purpose, TrustStore};
use super::keys::PrivateKey;
use super::{b64, unb64, SigError};
use crate::digest::DigestAlg;
use crate::time::{self, Timestamp};
use crate::xml::{a_canon, Element};

/// An enveloped signature over canonical bytes.
///
/// The signature value covers the canonical `SignedInfo` subtree, which in
/// turn carries the content digest, the signer certificate digest, the
/// purpose, the timestamp and any signed properties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureBlock {
    pub digest_alg: DigestAlg,
    pub digest_value: Vec<u8>,
    pub signer: MiniCert,
    pub timestamp: Timestamp,
    pub purpose: Purpose,
    pub properties: BTreeMap<String, String>,
    pub signature_value: Vec<u8>,
    pub counter_signatures: Vec<SignatureBlock>,
}

impl SignatureBlock {
    pub fn signed_info(&self) -> Element {
        let mut si = Element::new("SignedInfo")
            .attr("digestAlg", self.digest_alg.tag())
            .attr("signatureAlg", self.signer.key.alg.tag())
            .attr("purpose", self.purpose.tag())
            .attr("timestamp", time::format(&self.timestamp))
            .attr("signer", self.signer.digest())
            .child(Element::with_text("DigestValue", b64(&self.digest_value)));
        for (name, value) in &self.properties {
            si.push(Element::with_text("Property", value).attr("name", name));
        }
        si
    }

    pub fn property(&self, name: &str) -> Option<&str> {
        self.properties.get(name).map(String::as_str)
    }

    /// The block without its counter-signatures.
    fn bare(&self) -> SignatureBlock {
        SignatureBlock {
            counter_signatures: Vec::new(),
            ..self.clone()
        }
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("Signature")
            .child(self.signed_info())
            .child(Element::with_text("SignatureValue", b64(&self.signature_value)))
            .child(self.signer.to_xml());
        if !self.counter_signatures.is_empty() {
            let mut cs = Element::new("CounterSignatures");
            for c in &self.counter_signatures {
                cs.push(c.to_xml());
            }
            e.push(cs);
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, SigError> {
        let bad = |m: &str| SigError::Malformed(m.to_string());
        if e.name != "Signature" {
            return Err(bad("expected <Signature>"));
        }
        let si = e.first("SignedInfo").ok_or_else(|| bad("missing <SignedInfo>"))?;
        let attr = |name: &str| {
            si.get_attr(name)
                .ok_or_else(|| SigError::Malformed(format!("SignedInfo lacks `{name}`")))
        };
        let digest_alg: DigestAlg = attr("digestAlg")?
            .parse()
            .map_err(|e: String| SigError::UnsupportedAlgorithm(e))?;
        let signer = MiniCert::from_xml(e.first("MiniCert").ok_or_else(|| bad("missing <MiniCert>"))?)?;
        if attr("signatureAlg")? != signer.key.alg.tag() {
            return Err(bad("signature algorithm does not match signer key"));
        }
        let mut properties = BTreeMap::new();
        for p in si.elements_named("Property") {
            let name = p.get_attr("name").ok_or_else(|| bad("Property without name"))?;
            properties.insert(name.to_string(), p.text());
        }
        let mut counter_signatures = Vec::new();
        if let Some(cs) = e.first("CounterSignatures") {
            for c in cs.elements() {
                counter_signatures.push(SignatureBlock::from_xml(c)?);
            }
        }
        let block = SignatureBlock {
            digest_alg,
            digest_value: unb64(&si.child_text("DigestValue").ok_or_else(|| bad("missing <DigestValue>"))?)?,
            timestamp: time::parse(attr("timestamp")?).ok_or_else(|| bad("bad timestamp"))?,
            purpose: attr("purpose")?.parse()?,
            properties,
            signature_value: unb64(&e.child_text("SignatureValue").ok_or_else(|| bad("missing <SignatureValue>"))?)?,
            counter_signatures,
            signer,
        };
        if block.digest_value.len() != digest_alg.output_len() {
            return Err(bad("digest length does not match algorithm"));
        }
        if attr("signer")? != block.signer.digest() {
            return Err(bad("signer reference does not match embedded certificate"));
        }
        Ok(block)
    }

    /// Cryptographic check of this block alone over `covered` bytes.
    fn check(&self, covered: &[u8]) -> bool {
        self.digest_value.len() == self.digest_alg.output_len()
            && self.digest_alg.digest(covered) == self.digest_value
            && self.signer.has_purpose(self.purpose)
            && self
                .signer
                .key
                .verify(&a_canon(&self.signed_info()), &self.signature_value)
    }
}

/// Content together with its signature block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedDoc {
    pub content: Element,
    pub signature: SignatureBlock,
}

impl SignedDoc {
    pub fn to_xml(&self) -> Element {
        Element::new("SignedDoc")
            .child(Element::new("content").child(self.content.clone()))
            .child(self.signature.to_xml())
    }

    pub fn from_xml(e: &Element) -> Result<Self, SigError> {
        if e.name != "SignedDoc" {
            return Err(SigError::Malformed("expected <SignedDoc>".into()));
        }
        let content = single_content(e.first("content"))?;
        let sig = e
            .first("Signature")
            .ok_or_else(|| SigError::Malformed("missing <Signature>".into()))?;
        Ok(SignedDoc {
            content: content.clone(),
            signature: SignatureBlock::from_xml(sig)?,
        })
    }

    /// Bytes covered by the counter-signature at `index`: the canonical
    /// content, the primary block and every earlier counter-signature.
    fn counter_covered(&self, index: usize) -> Vec<u8> {
        let mut bytes = a_canon(&self.content);
        bytes.extend(a_canon(&self.signature.bare().to_xml()));
        for c in &self.signature.counter_signatures[..index] {
            bytes.extend(a_canon(&c.to_xml()));
        }
        bytes
    }
}

pub(crate) fn single_content(wrapper: Option<&Element>) -> Result<&Element, SigError> {
    let wrapper = wrapper.ok_or_else(|| SigError::Malformed("missing <content>".into()))?;
    let mut it = wrapper.elements();
    match (it.next(), it.next()) {
        (Some(c), None) if !wrapper.children.iter().any(|n| n.as_text().is_some()) => Ok(c),
        _ => Err(SigError::Malformed(
            "<content> must hold exactly one element".into(),
        )),
    }
}

/// A private key paired with the certificate for its public key.
#[derive(Debug, Clone)]
pub struct Signer {
    key: PrivateKey,
    cert: MiniCert,
}

impl Signer {
    pub fn new(key: PrivateKey, cert: MiniCert) -> Result<Self, SigError> {
        if key.public_key() != cert.key {
            return Err(SigError::KeyCertMismatch);
        }
        Ok(Signer { key, cert })
    }

    pub fn cert(&self) -> &MiniCert {
        &self.cert
    }

    pub fn key_id(&self) -> String {
        self.cert.key.key_id()
    }

    /// Signs `covered` bytes into a fresh block.
    pub fn sign_bytes(
        &self,
        covered: &[u8],
        digest_alg: DigestAlg,
        purpose: Purpose,
        at: Timestamp,
        properties: BTreeMap<String, String>,
    ) -> Result<SignatureBlock, SigError> {
        if purpose == Purpose::Issuer || !self.cert.has_purpose(purpose) {
            return Err(SigError::PurposeMismatch(purpose));
        }
        let mut block = SignatureBlock {
            digest_alg,
            digest_value: digest_alg.digest(covered),
            signer: self.cert.clone(),
            timestamp: at,
            purpose,
            properties,
            signature_value: Vec::new(),
            counter_signatures: Vec::new(),
        };
        block.signature_value = self.key.sign(&a_canon(&block.signed_info()));
        Ok(block)
    }

    pub fn sign(
        &self,
        content: &Element,
        purpose: Purpose,
        at: Timestamp,
        properties: BTreeMap<String, String>,
    ) -> Result<SignedDoc, SigError> {
        crate::xml::check_tree(content).map_err(|e| SigError::Malformed(e.to_string()))?;
        let signature = self.sign_bytes(&a_canon(content), DigestAlg::Sha256, purpose, at, properties)?;
        Ok(SignedDoc {
            content: content.clone(),
            signature,
        })
    }
}

pub fn sign_envelope(
    content: &Element,
    key: &PrivateKey,
    cert: &MiniCert,
    purpose: Purpose,
    at: Timestamp,
) -> Result<SignedDoc, SigError> {
    Signer::new(key.clone(), cert.clone())?.sign(content, purpose, at, BTreeMap::new())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockReport {
    pub signature_valid: bool,
    pub chain: Result<(), ChainError>,
    pub signer: String,
    pub purpose: Purpose,
    pub digest_alg: DigestAlg,
    pub timestamp: Timestamp,
}

impl BlockReport {
    pub fn is_valid(&self) -> bool {
        self.signature_valid && self.chain.is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvelopeReport {
    pub primary: BlockReport,
    pub counter_signatures: Vec<BlockReport>,
}

impl EnvelopeReport {
    pub fn signature_valid(&self) -> bool {
        self.primary.signature_valid
    }

    /// Every block verifies and chains to an anchor.
    pub fn is_valid(&self) -> bool {
        self.primary.is_valid() && self.counter_signatures.iter().all(BlockReport::is_valid)
    }
}

fn block_report(block: &SignatureBlock, covered: &[u8], trust: &TrustStore, at: &Timestamp) -> BlockReport {
    BlockReport {
        signature_valid: block.check(covered),
        chain: verify_chain(&block.signer, at, trust).map(|_| ()),
        signer: block.signer.subject.clone(),
        purpose: block.purpose,
        digest_alg: block.digest_alg,
        timestamp: block.timestamp,
    }
}

/// Verifies every block independently over the bytes it covers.
pub fn verify_envelope(signed: &SignedDoc, trust: &TrustStore, at: &Timestamp) -> EnvelopeReport {
    let primary = block_report(&signed.signature, &a_canon(&signed.content), trust, at);
    let counter_signatures = signed
        .signature
        .counter_signatures
        .iter()
        .enumerate()
        .map(|(i, c)| block_report(c, &signed.counter_covered(i), trust, at))
        .collect();
    EnvelopeReport {
        primary,
        counter_signatures,
    }
}

fn all_blocks_check(signed: &SignedDoc) -> bool {
    signed.signature.check(&a_canon(&signed.content))
        && signed
            .signature
            .counter_signatures
            .iter()
            .enumerate()
            .all(|(i, c)| c.check(&signed.counter_covered(i)))
}

/// Adds a counter-signature covering the content and all existing blocks.
pub fn counter_sign(
    signed: &SignedDoc,
    signer: &Signer,
    purpose: Purpose,
    digest_alg: DigestAlg,
    at: Timestamp,
) -> Result<SignedDoc, SigError> {
    if !all_blocks_check(signed) {
        return Err(SigError::OriginalInvalid);
    }
    let index = signed.signature.counter_signatures.len();
    let block = signer.sign_bytes(&signed.counter_covered(index), digest_alg, purpose, at, BTreeMap::new())?;
    let mut out = signed.clone();
    out.signature.counter_signatures.push(block);
    Ok(out)
}
