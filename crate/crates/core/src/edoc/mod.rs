//! E-doc assembly, processing rules, status lifecycle, revocation and
//! validity reports.

mod assemble;
mod lifecycle;
mod records;
mod rules;
mod validity;

pub use assemble::assemble;
pub use lifecycle::{transition_status, AttributeSet, TransitionTable, STATUS};
pub use records::{Receipt, RevocationRecord};
pub use rules::{apply_rules, ManualField, ProcessingRules, Rule};
pub use validity::{validate_edoc, Check, ValidationContext, ValidityReport};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::digest::sha256_hex;
use crate::sig::{SigError, SignatureBlock, SignedDoc};
use crate::time::{self, Timestamp};
use crate::xml::{a_canon, parse, Element, ValidationReport, XmlError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EdocError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error(transparent)]
    Sig(#[from] SigError),
    #[error("malformed e-doc: {0}")]
    Malformed(String),
    #[error("missing field {0}")]
    MissingField(String),
    #[error("value of {0} does not match its pattern")]
    PatternViolation(String),
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("manual field missing: {0}")]
    ManualFieldMissing(String),
    #[error("{0} is not a manual field")]
    UnexpectedManualField(String),
    #[error("input type mismatch: rules expect {expected}, got {found}")]
    InputTypeMismatch { expected: String, found: String },
    #[error("illegal status transition {from} -> {to}")]
    IllegalTransition { from: String, to: String },
    #[error("invalid rules or transition table: {0}")]
    Definition(String),
    #[error("assembled content does not validate: {0}")]
    StructureInvalid(ValidationReport),
}

/// Binding of a document to its definition bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EDocHeader {
    pub type_id: String,
    pub version: u32,
    pub def_digest: String,
    pub created_at: Timestamp,
}

impl EDocHeader {
    /// Signed properties that tie a signature to this header.
    pub fn properties(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("createdAt".to_string(), time::format(&self.created_at)),
            ("defDigest".to_string(), self.def_digest.clone()),
            ("typeId".to_string(), self.type_id.clone()),
            ("version".to_string(), self.version.to_string()),
        ])
    }

    pub fn to_xml(&self) -> Element {
        Element::new("header")
            .attr("typeId", &self.type_id)
            .attr("version", self.version.to_string())
            .attr("defDigest", &self.def_digest)
            .attr("createdAt", time::format(&self.created_at))
    }

    pub fn from_xml(e: &Element) -> Result<Self, EdocError> {
        let get = |name: &str| {
            e.get_attr(name)
                .ok_or_else(|| EdocError::Malformed(format!("header lacks `{name}`")))
        };
        Ok(EDocHeader {
            type_id: get("typeId")?.to_string(),
            version: get("version")?
                .parse()
                .map_err(|_| EdocError::Malformed("bad header version".into()))?,
            def_digest: get("defDigest")?.to_string(),
            created_at: time::parse(get("createdAt")?)
                .ok_or_else(|| EdocError::Malformed("bad createdAt".into()))?,
        })
    }
}

fn split_edoc(e: &Element) -> Result<(EDocHeader, Element, Option<&Element>), EdocError> {
    if e.name != "edoc" {
        return Err(EdocError::Malformed(format!("expected <edoc>, found <{}>", e.name)));
    }
    let mut header = None;
    let mut content = None;
    let mut signature = None;
    for child in e.elements() {
        let slot = match child.name.as_str() {
            "header" => &mut header,
            "content" => &mut content,
            "Signature" => &mut signature,
            other => return Err(EdocError::Malformed(format!("unexpected <{other}> in <edoc>"))),
        };
        if slot.replace(child).is_some() {
            return Err(EdocError::Malformed(format!("duplicate <{}>", child.name)));
        }
    }
    if !e.text().trim().is_empty() {
        return Err(EdocError::Malformed("text directly inside <edoc>".into()));
    }
    let header = EDocHeader::from_xml(header.ok_or_else(|| EdocError::Malformed("missing <header>".into()))?)?;
    let content = crate::sig::single_content(content)?.clone();
    Ok((header, content, signature))
}

/// An unsigned document: header binding plus content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    pub header: EDocHeader,
    pub content: Element,
}

impl Draft {
    pub fn to_xml(&self) -> Element {
        Element::new("edoc")
            .child(self.header.to_xml())
            .child(Element::new("content").child(self.content.clone()))
    }

    pub fn from_xml(e: &Element) -> Result<Self, EdocError> {
        let (header, content, signature) = split_edoc(e)?;
        if signature.is_some() {
            return Err(EdocError::Malformed("draft already carries a signature".into()));
        }
        Ok(Draft { header, content })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EdocError> {
        Self::from_xml(&parse(bytes)?)
    }
}

/// A signed e-doc.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EDoc {
    pub header: EDocHeader,
    pub signed: SignedDoc,
}

impl EDoc {
    pub fn content(&self) -> &Element {
        &self.signed.content
    }

    pub fn signature(&self) -> &SignatureBlock {
        &self.signed.signature
    }

    pub fn to_xml(&self) -> Element {
        Element::new("edoc")
            .child(self.header.to_xml())
            .child(Element::new("content").child(self.signed.content.clone()))
            .child(self.signed.signature.to_xml())
    }

    pub fn from_xml(e: &Element) -> Result<Self, EdocError> {
        let (header, content, signature) = split_edoc(e)?;
        let signature = signature.ok_or_else(|| EdocError::Malformed("missing <Signature>".into()))?;
        Ok(EDoc {
            header,
            signed: SignedDoc {
                content,
                signature: SignatureBlock::from_xml(signature)?,
            },
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EdocError> {
        Self::from_xml(&parse(bytes)?)
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        a_canon(&self.to_xml())
    }

    /// Hex SHA-256 of the canonical signed document.
    pub fn doc_id(&self) -> String {
        sha256_hex(&self.canonical_bytes())
    }

    /// Hex SHA-256 of the canonical content alone.
    pub fn content_digest(&self) -> String {
        sha256_hex(&a_canon(&self.signed.content))
    }

    /// The primary signature's signed properties match the header.
    pub fn header_is_signed(&self) -> bool {
        self.signed.signature.properties == self.header.properties()
    }
}
