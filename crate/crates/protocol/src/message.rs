use std::collections::BTreeMap;

use edoc_core::digest::{sha256_hex, DigestAlg};
use edoc_core::sig::{verify_envelope, EnvelopeReport, Purpose, SigError, SignatureBlock, SignedDoc, Signer, TrustStore};
use edoc_core::time::{self, Timestamp};
use edoc_core::xml::{a_canon, is_valid_name, Element, XNode};
use rand::RngCore;

use crate::frame::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Command,
    Response,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Command => "command",
            Direction::Response => "response",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsgHeader {
    pub msg_id: String,
    /// 128 random bits, lowercase hex.
    pub nonce: String,
    pub timestamp: Timestamp,
    pub direction: Direction,
}

impl MsgHeader {
    pub fn fresh_command(at: Timestamp) -> Self {
        let mut nonce = [0u8; 16];
        rand::thread_rng().fill_bytes(&mut nonce);
        MsgHeader {
            msg_id: uuid::Uuid::new_v4().to_string(),
            nonce: hex::encode(nonce),
            timestamp: at,
            direction: Direction::Command,
        }
    }

    /// Response header: echoes the msgId, nonce derived from the command's.
    pub fn response_to(cmd: &MsgHeader, at: Timestamp) -> Self {
        let digest = sha256_hex(format!("response\n{}\n{}", cmd.msg_id, cmd.nonce).as_bytes());
        MsgHeader {
            msg_id: cmd.msg_id.clone(),
            nonce: digest[..32].to_string(),
            timestamp: at,
            direction: Direction::Response,
        }
    }

    fn to_xml(&self) -> Element {
        Element::new("header")
            .attr("msgId", &self.msg_id)
            .attr("nonce", &self.nonce)
            .attr("timestamp", time::format(&self.timestamp))
            .attr("direction", self.direction.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub name: String,
    pub doc_type: Option<String>,
    pub args: Vec<Element>,
}

impl Command {
    pub fn new(name: impl Into<String>, doc_type: Option<&str>, args: Vec<Element>) -> Self {
        Command {
            name: name.into(),
            doc_type: doc_type.map(str::to_string),
            args,
        }
    }

    pub fn arg(&self, name: &str) -> Option<&Element> {
        self.args.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: String,
    pub payload: Vec<Element>,
}

impl Response {
    pub fn ok(payload: Vec<Element>) -> Self {
        Response {
            status: crate::codes::OK.to_string(),
            payload,
        }
    }

    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        Response {
            status: code.to_string(),
            payload: vec![Element::with_text("error", detail.into())],
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == crate::codes::OK
    }

    pub fn first(&self, name: &str) -> Option<&Element> {
        self.payload.iter().find(|p| p.name == name)
    }

    /// Detail text of an error response.
    pub fn detail(&self) -> String {
        self.first("error").map(Element::text).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Command(Command),
    Response(Response),
}

impl Body {
    fn to_xml(&self) -> Element {
        match self {
            Body::Command(c) => {
                let mut e = Element::new("command").attr("name", &c.name);
                if let Some(t) = &c.doc_type {
                    e.set_attr("docType", t);
                }
                for a in &c.args {
                    e.push(a.clone());
                }
                e
            }
            Body::Response(r) => {
                let mut e = Element::new("response").attr("status", &r.status);
                for p in &r.payload {
                    e.push(p.clone());
                }
                e
            }
        }
    }
}

/// A signed protocol message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AMessage {
    pub header: MsgHeader,
    pub body: Body,
    pub signature: SignatureBlock,
}

fn unsigned(header: &MsgHeader, body: &Body) -> Element {
    Element::new("AMessage").child(header.to_xml()).child(body.to_xml())
}

impl AMessage {
    /// Signs `body` under `header`. Commands need a role key, responses the
    /// platform key.
    pub fn sign(header: MsgHeader, body: Body, signer: &Signer) -> Result<Self, SigError> {
        let purpose = match header.direction {
            Direction::Command => Purpose::Role,
            Direction::Response => Purpose::Platform,
        };
        let signature = signer.sign_bytes(
            &a_canon(&unsigned(&header, &body)),
            DigestAlg::Sha256,
            purpose,
            header.timestamp,
            BTreeMap::new(),
        )?;
        Ok(AMessage { header, body, signature })
    }

    pub fn command(cmd: Command, signer: &Signer, at: Timestamp) -> Result<Self, SigError> {
        Self::sign(MsgHeader::fresh_command(at), Body::Command(cmd), signer)
    }

    pub fn response(to: &MsgHeader, resp: Response, signer: &Signer, at: Timestamp) -> Result<Self, SigError> {
        Self::sign(MsgHeader::response_to(to, at), Body::Response(resp), signer)
    }

    pub fn as_command(&self) -> Option<&Command> {
        match &self.body {
            Body::Command(c) => Some(c),
            Body::Response(_) => None,
        }
    }

    pub fn as_response(&self) -> Option<&Response> {
        match &self.body {
            Body::Response(r) => Some(r),
            Body::Command(_) => None,
        }
    }

    /// Key id (hex SHA-256 of the public key) of the signer.
    pub fn signer_key(&self) -> String {
        self.signature.signer.key.key_id()
    }

    /// Signature check plus chain verification of the signer certificate.
    pub fn verify(&self, trust: &TrustStore, at: &Timestamp) -> EnvelopeReport {
        verify_envelope(
            &SignedDoc {
                content: unsigned(&self.header, &self.body),
                signature: self.signature.clone(),
            },
            trust,
            at,
        )
    }

    pub fn to_xml(&self) -> Element {
        unsigned(&self.header, &self.body).child(self.signature.to_xml())
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        a_canon(&self.to_xml())
    }

    /// Strict structural check of the envelope.
    pub fn from_xml(e: &Element) -> Result<Self, ProtocolError> {
        let bad = |m: String| ProtocolError::SchemaViolation(m);
        if e.name != "AMessage" {
            return Err(bad(format!("root is <{}>", e.name)));
        }
        if !e.attrs.is_empty() || e.children.iter().any(|c| matches!(c, XNode::Text(_))) {
            return Err(bad("unexpected attributes or text on <AMessage>".into()));
        }
        let kids: Vec<&Element> = e.elements().collect();
        let [h, b, s] = kids.as_slice() else {
            return Err(bad("expected header, body and Signature".into()));
        };
        if h.name != "header" || s.name != "Signature" {
            return Err(bad("expected header, body and Signature".into()));
        }
        if h.has_element_children() || !h.text().is_empty() || h.attrs.len() != 4 {
            return Err(bad("bad <header>".into()));
        }
        let get = |name: &str| h.get_attr(name).ok_or_else(|| bad(format!("header lacks `{name}`")));
        let nonce = get("nonce")?;
        if nonce.len() != 32 || !nonce.bytes().all(|c| c.is_ascii_digit() || (b'a'..=b'f').contains(&c)) {
            return Err(bad("nonce must be 128 bits of lowercase hex".into()));
        }
        let direction = match get("direction")? {
            "command" => Direction::Command,
            "response" => Direction::Response,
            other => return Err(bad(format!("bad direction `{other}`"))),
        };
        let header = MsgHeader {
            msg_id: get("msgId")?.to_string(),
            nonce: nonce.to_string(),
            timestamp: time::parse(get("timestamp")?).ok_or_else(|| bad("bad timestamp".into()))?,
            direction,
        };
        if header.msg_id.is_empty() {
            return Err(bad("empty msgId".into()));
        }
        if b.children.iter().any(|c| matches!(c, XNode::Text(_))) {
            return Err(bad("text directly inside the body".into()));
        }
        let children: Vec<Element> = b.elements().cloned().collect();
        let body = match (b.name.as_str(), direction) {
            ("command", Direction::Command) => {
                let name = b.get_attr("name").ok_or_else(|| bad("command lacks `name`".into()))?;
                if !is_valid_name(name) || b.attrs.iter().any(|(k, _)| k != "name" && k != "docType") {
                    return Err(bad("bad command attributes".into()));
                }
                Body::Command(Command {
                    name: name.to_string(),
                    doc_type: b.get_attr("docType").map(str::to_string),
                    args: children,
                })
            }
            ("response", Direction::Response) => {
                if b.attrs.len() != 1 {
                    return Err(bad("bad response attributes".into()));
                }
                Body::Response(Response {
                    status: b.get_attr("status").ok_or_else(|| bad("response lacks `status`".into()))?.to_string(),
                    payload: children,
                })
            }
            _ => return Err(bad("body does not match direction".into())),
        };
        let signature = SignatureBlock::from_xml(s).map_err(|e| bad(e.to_string()))?;
        Ok(AMessage { header, body, signature })
    }
}
