//! Platform-signed records kept beside stored documents.

use std::collections::BTreeMap;

use super::EdocError;
use crate::sig::{verify_envelope, Purpose, SignedDoc, Signer, TrustStore};
use crate::time::{self, Timestamp};
use crate::xml::{parse, Element};

fn platform_valid(signed: &SignedDoc, trust: &TrustStore, at: &Timestamp) -> bool {
    signed.signature.purpose == Purpose::Platform && verify_envelope(signed, trust, at).is_valid()
}

fn required<'a>(e: &'a Element, name: &str) -> Result<&'a str, EdocError> {
    e.get_attr(name)
        .ok_or_else(|| EdocError::Malformed(format!("<{}> lacks `{name}`", e.name)))
}

fn timestamp(e: &Element, name: &str) -> Result<Timestamp, EdocError> {
    time::parse(required(e, name)?).ok_or_else(|| EdocError::Malformed(format!("bad `{name}`")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevocationRecord {
    pub doc_id: String,
    pub reason: String,
    pub revoked_at: Timestamp,
    pub signed: SignedDoc,
}

impl RevocationRecord {
    pub fn issue(doc_id: &str, reason: &str, at: Timestamp, platform: &Signer) -> Result<Self, EdocError> {
        let content = Element::new("revocation")
            .attr("docId", doc_id)
            .attr("revokedAt", time::format(&at))
            .child(Element::with_text("reason", reason));
        let signed = platform.sign(&content, Purpose::Platform, at, BTreeMap::new())?;
        Self::from_signed(signed)
    }

    fn from_signed(signed: SignedDoc) -> Result<Self, EdocError> {
        let c = &signed.content;
        if c.name != "revocation" {
            return Err(EdocError::Malformed("expected <revocation>".into()));
        }
        Ok(RevocationRecord {
            doc_id: required(c, "docId")?.to_string(),
            reason: c.child_text("reason").unwrap_or_default(),
            revoked_at: timestamp(c, "revokedAt")?,
            signed,
        })
    }

    pub fn verify(&self, trust: &TrustStore, at: &Timestamp) -> bool {
        platform_valid(&self.signed, trust, at)
    }

    pub fn to_xml(&self) -> Element {
        self.signed.to_xml()
    }

    pub fn from_xml(e: &Element) -> Result<Self, EdocError> {
        Self::from_signed(SignedDoc::from_xml(e)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EdocError> {
        Self::from_xml(&parse(bytes)?)
    }
}

/// Acknowledgement that a document was stored: binds the docId and the
/// content digest to the storage time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub doc_id: String,
    pub content_digest: String,
    pub timestamp: Timestamp,
    pub signed: SignedDoc,
}

impl Receipt {
    pub fn issue(doc_id: &str, content_digest: &str, at: Timestamp, platform: &Signer) -> Result<Self, EdocError> {
        let content = Element::new("receipt")
            .attr("docId", doc_id)
            .attr("contentDigest", content_digest)
            .attr("timestamp", time::format(&at));
        let signed = platform.sign(&content, Purpose::Platform, at, BTreeMap::new())?;
        Self::from_signed(signed)
    }

    fn from_signed(signed: SignedDoc) -> Result<Self, EdocError> {
        let c = &signed.content;
        if c.name != "receipt" {
            return Err(EdocError::Malformed("expected <receipt>".into()));
        }
        Ok(Receipt {
            doc_id: required(c, "docId")?.to_string(),
            content_digest: required(c, "contentDigest")?.to_string(),
            timestamp: timestamp(c, "timestamp")?,
            signed,
        })
    }

    pub fn verify(&self, trust: &TrustStore, at: &Timestamp) -> bool {
        platform_valid(&self.signed, trust, at)
    }

    /// The receipt is valid and names exactly these stored bytes.
    pub fn binds(&self, doc: &super::EDoc, trust: &TrustStore, at: &Timestamp) -> bool {
        self.verify(trust, at) && self.doc_id == doc.doc_id() && self.content_digest == doc.content_digest()
    }

    pub fn to_xml(&self) -> Element {
        self.signed.to_xml()
    }

    pub fn from_xml(e: &Element) -> Result<Self, EdocError> {
        Self::from_signed(SignedDoc::from_xml(e)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EdocError> {
        Self::from_xml(&parse(bytes)?)
    }
}
