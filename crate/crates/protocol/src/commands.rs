//! Argument and payload schemas of the command catalog.
//!
//! Builders return [`Command`] values; the matching payload types have
//! `to_xml`/`from_xml` so the platform and its clients share one schema.

use std::collections::BTreeMap;

use edoc_core::bundle::DefinitionBundle;
use edoc_core::edoc::{AttributeSet, EDoc, Receipt, RevocationRecord};
use edoc_core::time::{self, Timestamp};
use edoc_core::xml::Element;

use crate::catalog::CommandName;
use crate::message::Command;

fn cmd(name: CommandName, doc_type: Option<&str>, args: Vec<Element>) -> Command {
    Command::new(name.as_str(), doc_type, args)
}

fn field_list(tag: &str, values: &BTreeMap<String, String>) -> Vec<Element> {
    values
        .iter()
        .map(|(p, v)| Element::with_text(tag, v).attr("path", p))
        .collect()
}

/// Assemble a draft from field values.
pub fn create_from_fields(doc_type: &str, fields: &BTreeMap<String, String>) -> Command {
    cmd(CommandName::CreateEdoc, Some(doc_type), field_list("field", fields))
}

/// Derive a draft from a stored input document with the type's rules.
pub fn create_from_input(doc_type: &str, input_doc_id: &str, manual: &BTreeMap<String, String>) -> Command {
    let mut args = vec![Element::new("input").attr("docId", input_doc_id)];
    args.extend(field_list("manual", manual));
    cmd(CommandName::CreateEdoc, Some(doc_type), args)
}

/// Status change applied atomically with a store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub doc_id: String,
    pub to: String,
    pub expect: Option<String>,
}

pub fn store(doc: &EDoc, link: Option<&Link>) -> Command {
    let mut args = vec![doc.to_xml()];
    if let Some(l) = link {
        let mut e = Element::new("link").attr("docId", &l.doc_id).attr("to", &l.to);
        if let Some(x) = &l.expect {
            e.set_attr("expect", x);
        }
        args.push(e);
    }
    cmd(CommandName::StoreEdoc, Some(&doc.header.type_id), args)
}

pub fn get(doc_type: &str, doc_id: &str) -> Command {
    cmd(CommandName::GetEdoc, Some(doc_type), vec![Element::new("doc").attr("docId", doc_id)])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Attr(String, String),
    Field(String, String),
}

impl Predicate {
    pub fn to_xml(&self) -> Element {
        match self {
            Predicate::Attr(n, v) => Element::with_text("where", v).attr("attr", n),
            Predicate::Field(p, v) => Element::with_text("where", v).attr("path", p),
        }
    }

    pub fn from_xml(e: &Element) -> Option<Self> {
        match (e.get_attr("attr"), e.get_attr("path")) {
            (Some(n), None) => Some(Predicate::Attr(n.to_string(), e.text())),
            (None, Some(p)) => Some(Predicate::Field(p.to_string(), e.text())),
            _ => None,
        }
    }
}

pub fn search(doc_type: &str, predicates: &[Predicate]) -> Command {
    cmd(
        CommandName::SearchEdocs,
        Some(doc_type),
        predicates.iter().map(Predicate::to_xml).collect(),
    )
}

pub fn set_attribute(doc_type: &str, doc_id: &str, name: &str, value: &str, expect: Option<&str>) -> Command {
    let mut e = Element::with_text("set", value).attr("docId", doc_id).attr("name", name);
    if let Some(x) = expect {
        e.set_attr("expect", x);
    }
    cmd(CommandName::SetAttribute, Some(doc_type), vec![e])
}

pub fn revoke(doc_type: &str, doc_id: &str, reason: &str) -> Command {
    cmd(
        CommandName::RevokeEdoc,
        Some(doc_type),
        vec![Element::with_text("revoke", reason).attr("docId", doc_id)],
    )
}

pub fn validate_stored(doc_type: &str, doc_id: &str, at: Option<Timestamp>) -> Command {
    let mut e = Element::new("validate").attr("docId", doc_id);
    if let Some(t) = at {
        e.set_attr("at", time::format(&t));
    }
    cmd(CommandName::ValidateEdoc, Some(doc_type), vec![e])
}

pub fn validate_inline(doc: &EDoc, at: Option<Timestamp>) -> Command {
    let mut e = Element::new("validate").child(doc.to_xml());
    if let Some(t) = at {
        e.set_attr("at", time::format(&t));
    }
    cmd(CommandName::ValidateEdoc, Some(&doc.header.type_id), vec![e])
}

pub fn counter_sign(doc_type: &str, doc_id: &str, digest_alg: &str) -> Command {
    cmd(
        CommandName::CounterSign,
        Some(doc_type),
        vec![Element::new("countersign").attr("docId", doc_id).attr("digestAlg", digest_alg)],
    )
}

pub fn get_definition(doc_type: &str, version: Option<u32>) -> Command {
    let mut e = Element::new("definition");
    if let Some(v) = version {
        e.set_attr("version", v.to_string());
    }
    cmd(CommandName::GetDefinition, Some(doc_type), vec![e])
}

pub fn acknowledge(doc_type: &str, doc_id: &str) -> Command {
    cmd(CommandName::Acknowledge, Some(doc_type), vec![Element::new("ack").attr("docId", doc_id)])
}

pub fn put_definition(bundle: &DefinitionBundle) -> Command {
    cmd(CommandName::PutDefinition, Some(bundle.type_id()), vec![bundle.to_xml()])
}

pub fn set_role_map(rolemap: Element) -> Command {
    cmd(CommandName::SetRoleMap, None, vec![rolemap])
}

pub fn port_control(port: &str, action: &str) -> Command {
    cmd(
        CommandName::PortControl,
        None,
        vec![Element::new("port").attr("name", port).attr("action", action)],
    )
}

pub fn get_log(from: u64, to: Option<u64>) -> Command {
    let mut e = Element::new("range").attr("from", from.to_string());
    if let Some(t) = to {
        e.set_attr("to", t.to_string());
    }
    cmd(CommandName::GetLog, None, vec![e])
}

/// One search result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchHit {
    pub doc_id: String,
    pub fields: Vec<(String, String)>,
    pub attrs: AttributeSet,
}

impl SearchHit {
    pub fn field(&self, path: &str) -> Option<&str> {
        self.fields.iter().find(|(p, _)| p == path).map(|(_, v)| v.as_str())
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("hit").attr("docId", &self.doc_id);
        for (p, v) in &self.fields {
            e.push(Element::with_text("field", v).attr("path", p));
        }
        e.push(self.attrs.to_xml());
        e
    }

    pub fn from_xml(e: &Element) -> Option<Self> {
        Some(SearchHit {
            doc_id: e.get_attr("docId")?.to_string(),
            fields: e
                .elements_named("field")
                .filter_map(|f| Some((f.get_attr("path")?.to_string(), f.text())))
                .collect(),
            attrs: AttributeSet::from_xml(e.first("attrs")?).ok()?,
        })
    }
}

pub fn hits_to_xml(hits: &[SearchHit]) -> Element {
    let mut e = Element::new("results").attr("count", hits.len().to_string());
    for h in hits {
        e.push(h.to_xml());
    }
    e
}

pub fn hits_from_xml(e: &Element) -> Option<Vec<SearchHit>> {
    e.elements_named("hit").map(SearchHit::from_xml).collect()
}

/// Everything the directory holds about one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocRecordView {
    pub doc: EDoc,
    pub attrs: AttributeSet,
    pub receipt: Option<Receipt>,
    pub revocation: Option<RevocationRecord>,
}

impl DocRecordView {
    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("record")
            .attr("docId", self.doc.doc_id())
            .child(self.doc.to_xml())
            .child(self.attrs.to_xml());
        if let Some(r) = &self.receipt {
            e.push(Element::new("receipt").child(r.to_xml()));
        }
        if let Some(r) = &self.revocation {
            e.push(Element::new("revocation").child(r.to_xml()));
        }
        e
    }

    pub fn from_xml(e: &Element) -> Option<Self> {
        let wrapped = |name: &str| e.first(name).and_then(|w| w.first("SignedDoc"));
        Some(DocRecordView {
            doc: EDoc::from_xml(e.first("edoc")?).ok()?,
            attrs: AttributeSet::from_xml(e.first("attrs")?).ok()?,
            receipt: match wrapped("receipt") {
                Some(r) => Some(Receipt::from_xml(r).ok()?),
                None => None,
            },
            revocation: match wrapped("revocation") {
                Some(r) => Some(RevocationRecord::from_xml(r).ok()?),
                None => None,
            },
        })
    }
}

/// Result of StoreEdoc.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stored {
    pub doc_id: String,
    pub receipt: Receipt,
    pub attrs: AttributeSet,
    /// Attributes of the linked document after its transition.
    pub linked: Option<(String, AttributeSet)>,
}

impl Stored {
    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("stored")
            .attr("docId", &self.doc_id)
            .child(Element::new("receipt").child(self.receipt.to_xml()))
            .child(self.attrs.to_xml());
        if let Some((id, a)) = &self.linked {
            e.push(Element::new("linked").attr("docId", id).child(a.to_xml()));
        }
        e
    }

    pub fn from_xml(e: &Element) -> Option<Self> {
        Some(Stored {
            doc_id: e.get_attr("docId")?.to_string(),
            receipt: Receipt::from_xml(e.first("receipt")?.first("SignedDoc")?).ok()?,
            attrs: AttributeSet::from_xml(e.first("attrs")?).ok()?,
            linked: match e.first("linked") {
                Some(l) => Some((l.get_attr("docId")?.to_string(), AttributeSet::from_xml(l.first("attrs")?).ok()?)),
                None => None,
            },
        })
    }
}
