use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::keys::{PrivateKey, PublicKey, SigAlg};
use super::{b64, unb64, SigError};
use crate::digest::sha256_hex;
use crate::time::{self, Timestamp};
use crate::xml::{a_canon, Element};

const MAX_CHAIN_DEPTH: usize = 8;

/// What a certificate's key may be used for. Authentication and signing
/// keys are always distinct key pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Purpose {
    Auth,
    Sign,
    Role,
    Platform,
    Issuer,
}

impl Purpose {
    pub const ALL: [Purpose; 5] = [
        Purpose::Auth,
        Purpose::Sign,
        Purpose::Role,
        Purpose::Platform,
        Purpose::Issuer,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Purpose::Auth => "auth",
            Purpose::Sign => "sign",
            Purpose::Role => "role",
            Purpose::Platform => "platform",
            Purpose::Issuer => "issuer",
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Purpose {
    type Err = SigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Purpose::ALL
            .into_iter()
            .find(|p| p.tag() == s)
            .ok_or_else(|| SigError::InvalidCert(format!("unknown purpose `{s}`")))
    }
}

/// Certificate contents before the issuer signs them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertTemplate {
    pub subject: String,
    pub key: PublicKey,
    pub purposes: BTreeSet<Purpose>,
    pub not_before: Timestamp,
    pub not_after: Timestamp,
    pub serial: u64,
    pub extensions: BTreeMap<String, String>,
}

impl CertTemplate {
    pub fn new(
        subject: &str,
        key: PublicKey,
        purposes: impl IntoIterator<Item = Purpose>,
        not_before: Timestamp,
        not_after: Timestamp,
        serial: u64,
    ) -> Self {
        CertTemplate {
            subject: subject.to_string(),
            key,
            purposes: purposes.into_iter().collect(),
            not_before,
            not_after,
            serial,
            extensions: BTreeMap::new(),
        }
    }

    pub fn extension(mut self, name: &str, value: &str) -> Self {
        self.extensions.insert(name.to_string(), value.to_string());
        self
    }

    fn check(&self) -> Result<(), SigError> {
        if self.not_before >= self.not_after {
            return Err(SigError::InvalidCert("notBefore must precede notAfter".into()));
        }
        if self.purposes.is_empty() {
            return Err(SigError::InvalidCert("no purposes".into()));
        }
        if self.subject.is_empty() {
            return Err(SigError::InvalidCert("empty subject".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniCert {
    pub subject: String,
    pub key: PublicKey,
    pub purposes: BTreeSet<Purpose>,
    pub not_before: Timestamp,
    pub not_after: Timestamp,
    pub issuer: String,
    pub serial: u64,
    pub extensions: BTreeMap<String, String>,
    pub issuer_signature: Vec<u8>,
}

impl MiniCert {
    pub fn has_purpose(&self, p: Purpose) -> bool {
        self.purposes.contains(&p)
    }

    pub fn valid_at(&self, at: &Timestamp) -> bool {
        self.not_before <= *at && *at <= self.not_after
    }

    pub fn extension(&self, name: &str) -> Option<&str> {
        self.extensions.get(name).map(String::as_str)
    }

    /// Canonical bytes covered by the issuer signature.
    pub fn body_bytes(&self) -> Vec<u8> {
        a_canon(&self.body_xml())
    }

    /// Hex SHA-256 of the full canonical certificate.
    pub fn digest(&self) -> String {
        sha256_hex(&a_canon(&self.to_xml()))
    }

    fn body_xml(&self) -> Element {
        let purposes: Vec<&str> = self.purposes.iter().map(|p| p.tag()).collect();
        let mut e = Element::new("MiniCert")
            .attr("serial", self.serial.to_string())
            .child(Element::with_text("subject", &self.subject))
            .child(Element::with_text("issuer", &self.issuer))
            .child(Element::with_text("key", b64(&self.key.bytes)).attr("alg", self.key.alg.tag()))
            .child(Element::with_text("purposes", purposes.join(" ")))
            .child(
                Element::new("validity")
                    .attr("notBefore", time::format(&self.not_before))
                    .attr("notAfter", time::format(&self.not_after)),
            );
        for (name, value) in &self.extensions {
            e.push(Element::with_text("extension", value).attr("name", name));
        }
        e
    }

    pub fn to_xml(&self) -> Element {
        self.body_xml()
            .child(Element::with_text("issuerSignature", b64(&self.issuer_signature)))
    }

    pub fn from_xml(e: &Element) -> Result<Self, SigError> {
        let bad = |m: &str| SigError::InvalidCert(m.to_string());
        if e.name != "MiniCert" {
            return Err(bad("expected <MiniCert>"));
        }
        let text = |name: &str| {
            e.child_text(name)
                .ok_or_else(|| SigError::InvalidCert(format!("missing <{name}>")))
        };
        let key_el = e.first("key").ok_or_else(|| bad("missing <key>"))?;
        let alg: SigAlg = key_el.get_attr("alg").unwrap_or("").parse()?;
        let validity = e.first("validity").ok_or_else(|| bad("missing <validity>"))?;
        let ts = |name: &str| {
            validity
                .get_attr(name)
                .and_then(time::parse)
                .ok_or_else(|| SigError::InvalidCert(format!("bad {name}")))
        };
        let purposes = text("purposes")?
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<BTreeSet<_>, _>>()?;
        let mut extensions = BTreeMap::new();
        for x in e.elements_named("extension") {
            let name = x.get_attr("name").ok_or_else(|| bad("extension without name"))?;
            extensions.insert(name.to_string(), x.text());
        }
        let cert = MiniCert {
            subject: text("subject")?,
            key: PublicKey {
                alg,
                bytes: unb64(&key_el.text())?,
            },
            purposes,
            not_before: ts("notBefore")?,
            not_after: ts("notAfter")?,
            issuer: text("issuer")?,
            serial: e
                .get_attr("serial")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad serial"))?,
            extensions,
            issuer_signature: unb64(&text("issuerSignature")?)?,
        };
        if cert.not_before >= cert.not_after || cert.purposes.is_empty() {
            return Err(bad("inconsistent validity or purposes"));
        }
        Ok(cert)
    }
}

/// Issues a certificate signed by `issuer_key`, checking that the issuer
/// certificate may issue and is valid at `at`.
pub fn issue_cert(
    template: CertTemplate,
    issuer_key: &PrivateKey,
    issuer_cert: &MiniCert,
    at: &Timestamp,
) -> Result<MiniCert, SigError> {
    template.check()?;
    if !issuer_cert.has_purpose(Purpose::Issuer) {
        return Err(SigError::IssuerNotAuthorized(issuer_cert.subject.clone()));
    }
    if !issuer_cert.valid_at(at) {
        return Err(SigError::IssuerExpired(issuer_cert.subject.clone()));
    }
    if issuer_key.public_key() != issuer_cert.key {
        return Err(SigError::KeyCertMismatch);
    }
    Ok(sign_template(template, &issuer_cert.subject, issuer_key))
}

/// Creates a self-signed trust anchor. The `issuer` purpose is always added.
pub fn self_signed(mut template: CertTemplate, key: &PrivateKey) -> Result<MiniCert, SigError> {
    template.purposes.insert(Purpose::Issuer);
    template.check()?;
    if key.public_key() != template.key {
        return Err(SigError::KeyCertMismatch);
    }
    let subject = template.subject.clone();
    Ok(sign_template(template, &subject, key))
}

fn sign_template(t: CertTemplate, issuer: &str, key: &PrivateKey) -> MiniCert {
    let mut cert = MiniCert {
        subject: t.subject,
        key: t.key,
        purposes: t.purposes,
        not_before: t.not_before,
        not_after: t.not_after,
        issuer: issuer.to_string(),
        serial: t.serial,
        extensions: t.extensions,
        issuer_signature: Vec::new(),
    };
    cert.issuer_signature = key.sign(&cert.body_bytes());
    cert
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("no chain to a trust anchor for `{0}`")]
    UntrustedRoot(String),
    #[error("certificate `{0}` is outside its validity window")]
    Expired(String),
    #[error("certificate `{issuer}`/{serial} is revoked")]
    Revoked { issuer: String, serial: u64 },
    #[error("bad issuer signature on `{0}`")]
    BadSignature(String),
    #[error("certificate `{0}` is not allowed to issue certificates")]
    IssuerNotAuthorized(String),
    #[error("chain longer than {MAX_CHAIN_DEPTH} links")]
    TooLong,
}

impl ChainError {
    pub fn code(&self) -> &'static str {
        match self {
            ChainError::UntrustedRoot(_) => "UntrustedRoot",
            ChainError::Expired(_) => "Expired",
            ChainError::Revoked { .. } => "Revoked",
            ChainError::BadSignature(_) => "BadSignature",
            ChainError::IssuerNotAuthorized(_) => "IssuerNotAuthorized",
            ChainError::TooLong => "TooLong",
        }
    }
}

/// Anchors, a pool of intermediate certificates for path building, and the
/// flat revocation list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrustStore {
    anchors: Vec<MiniCert>,
    intermediates: Vec<MiniCert>,
    revoked: BTreeSet<(String, u64)>,
}

impl TrustStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a trust anchor; it must be self-signed and carry the issuer purpose.
    pub fn add_anchor(&mut self, cert: MiniCert) -> Result<(), SigError> {
        if cert.subject != cert.issuer
            || !cert.has_purpose(Purpose::Issuer)
            || !cert.key.verify(&cert.body_bytes(), &cert.issuer_signature)
        {
            return Err(SigError::InvalidCert(format!(
                "`{}` is not a self-signed issuer certificate",
                cert.subject
            )));
        }
        if !self.anchors.contains(&cert) {
            self.anchors.push(cert);
        }
        Ok(())
    }

    pub fn add_intermediate(&mut self, cert: MiniCert) {
        if !self.intermediates.contains(&cert) {
            self.intermediates.push(cert);
        }
    }

    pub fn revoke(&mut self, issuer: &str, serial: u64) {
        self.revoked.insert((issuer.to_string(), serial));
    }

    pub fn is_revoked(&self, cert: &MiniCert) -> bool {
        self.revoked.contains(&(cert.issuer.clone(), cert.serial))
    }

    pub fn anchors(&self) -> &[MiniCert] {
        &self.anchors
    }

    pub fn merge(&mut self, other: &TrustStore) {
        for a in &other.anchors {
            if !self.anchors.contains(a) {
                self.anchors.push(a.clone());
            }
        }
        for i in &other.intermediates {
            self.add_intermediate(i.clone());
        }
        self.revoked.extend(other.revoked.iter().cloned());
    }

    pub fn to_xml(&self) -> Element {
        let mut anchors = Element::new("anchors");
        for a in &self.anchors {
            anchors.push(a.to_xml());
        }
        let mut intermediates = Element::new("intermediates");
        for i in &self.intermediates {
            intermediates.push(i.to_xml());
        }
        let mut root = Element::new("truststore").child(anchors).child(intermediates);
        for (issuer, serial) in &self.revoked {
            root.push(
                Element::new("revoked")
                    .attr("issuer", issuer)
                    .attr("serial", serial.to_string()),
            );
        }
        root
    }

    pub fn from_xml(e: &Element) -> Result<Self, SigError> {
        if e.name != "truststore" {
            return Err(SigError::Malformed("expected <truststore>".into()));
        }
        let mut store = TrustStore::new();
        if let Some(anchors) = e.first("anchors") {
            for a in anchors.elements() {
                store.add_anchor(MiniCert::from_xml(a)?)?;
            }
        }
        if let Some(inter) = e.first("intermediates") {
            for c in inter.elements() {
                store.add_intermediate(MiniCert::from_xml(c)?);
            }
        }
        for r in e.elements_named("revoked") {
            let issuer = r.get_attr("issuer").unwrap_or_default();
            let serial = r
                .get_attr("serial")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| SigError::Malformed("bad revoked serial".into()))?;
            store.revoke(issuer, serial);
        }
        Ok(store)
    }
}

/// Builds and checks a path from `cert` to an anchor. Returns the chain from
/// leaf to anchor.
pub fn verify_chain(
    cert: &MiniCert,
    at: &Timestamp,
    trust: &TrustStore,
) -> Result<Vec<MiniCert>, ChainError> {
    build_path(cert, at, trust, 0)
}

fn build_path(
    cert: &MiniCert,
    at: &Timestamp,
    trust: &TrustStore,
    depth: usize,
) -> Result<Vec<MiniCert>, ChainError> {
    if trust.is_revoked(cert) {
        return Err(ChainError::Revoked {
            issuer: cert.issuer.clone(),
            serial: cert.serial,
        });
    }
    if !cert.valid_at(at) {
        return Err(ChainError::Expired(cert.subject.clone()));
    }
    if trust.anchors.contains(cert) {
        return Ok(vec![cert.clone()]);
    }
    if depth >= MAX_CHAIN_DEPTH {
        return Err(ChainError::TooLong);
    }
    let body = cert.body_bytes();
    let mut last = ChainError::UntrustedRoot(cert.subject.clone());
    for candidate in trust
        .anchors
        .iter()
        .chain(&trust.intermediates)
        .filter(|c| c.subject == cert.issuer && *c != cert)
    {
        if !candidate.key.verify(&body, &cert.issuer_signature) {
            last = ChainError::BadSignature(cert.subject.clone());
            continue;
        }
        if !candidate.has_purpose(Purpose::Issuer) {
            last = ChainError::IssuerNotAuthorized(candidate.subject.clone());
            continue;
        }
        match build_path(candidate, at, trust, depth + 1) {
            Ok(mut chain) => {
                chain.insert(0, cert.clone());
                return Ok(chain);
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}
