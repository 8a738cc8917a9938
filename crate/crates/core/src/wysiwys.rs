//! What-you-see-is-what-you-sign rendering.
//!
//! A document is either rendered completely or refused. Every text value
//! and attribute of the content must be covered by the type's display
//! mapping; anything unmapped is treated as a hidden field.
//!
//! The serialized form is bit-exact: header lines `label: value`, one empty
//! line, then body lines `label: value`, each terminated by LF.

use std::fmt;

use thiserror::Error;

use crate::bundle::{DefinitionBundle, Definitions};
use crate::digest::sha256_hex;
use crate::edoc::{Draft, EDoc, EDocHeader, EdocError};
use crate::sig::{verify_envelope, EnvelopeReport, Purpose, SigError, SignedDoc, Signer, TrustStore};
use crate::digest::DigestAlg;
use crate::time::{self, Timestamp};
use crate::xml::{a_canon, check_tree, parse, Element, TypeDef, ValidationReport, XmlError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WysiwysError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("non-printable character U+{:04X} at {path}", *.ch as u32)]
    ForbiddenChar { ch: char, path: String },
    #[error("content at {0} has no display mapping")]
    Unmapped(String),
    #[error("content does not match its definition: {0}")]
    StructureInvalid(ValidationReport),
    #[error("value at {path} is not a valid {format}")]
    FormatMismatch { path: String, format: Format },
    #[error("definition mismatch: {0}")]
    DefinitionMismatch(String),
    #[error("unknown document type {0}")]
    UnknownType(String),
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("invalid display mapping: {0}")]
    BadMapping(String),
}

impl WysiwysError {
    /// Stable error family name for CLI and wire payloads.
    pub fn family(&self) -> &'static str {
        match self {
            WysiwysError::Xml(e) => e.family(),
            WysiwysError::ForbiddenChar { .. } => "ForbiddenChar",
            WysiwysError::Unmapped(_) => "Unmapped",
            WysiwysError::StructureInvalid(_) => "StructureInvalid",
            WysiwysError::FormatMismatch { .. } => "FormatMismatch",
            WysiwysError::DefinitionMismatch(_) => "DefinitionMismatch",
            WysiwysError::UnknownType(_) => "UnknownType",
            WysiwysError::Malformed(_) => "Malformed",
            WysiwysError::BadMapping(_) => "BadMapping",
        }
    }
}

impl From<EdocError> for WysiwysError {
    fn from(e: EdocError) -> Self {
        match e {
            EdocError::Xml(x) => WysiwysError::Xml(x),
            EdocError::StructureInvalid(r) => WysiwysError::StructureInvalid(r),
            other => WysiwysError::Malformed(other.to_string()),
        }
    }
}

impl From<SigError> for WysiwysError {
    fn from(e: SigError) -> Self {
        WysiwysError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Date,
    Number,
}

impl Format {
    pub fn tag(self) -> &'static str {
        match self {
            Format::Text => "text",
            Format::Date => "date",
            Format::Number => "number",
        }
    }

    /// Shape check only; values are never rewritten.
    pub fn accepts(self, value: &str) -> bool {
        match self {
            Format::Text => true,
            Format::Date => {
                time::parse(value).is_some() || chrono::NaiveDate::parse_from_str(value, "%Y-%m-%d").is_ok()
            }
            Format::Number => {
                let digits = value.strip_prefix('-').unwrap_or(value);
                let (int, frac) = match digits.split_once('.') {
                    Some((i, f)) => (i, Some(f)),
                    None => (digits, None),
                };
                !int.is_empty()
                    && int.bytes().all(|b| b.is_ascii_digit())
                    && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
            }
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "date" => Ok(Format::Date),
            "number" => Ok(Format::Number),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplayEntry {
    /// Absolute element path, or `element/@attr` for attributes.
    pub path: String,
    pub label: String,
    pub format: Format,
}

/// Ordered label mapping for a type (`display.xml`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DisplayMapping {
    pub entries: Vec<DisplayEntry>,
}

impl DisplayMapping {
    pub fn entry(&self, path: &str) -> Option<&DisplayEntry> {
        self.entries.iter().find(|e| e.path == path)
    }

    /// Labels are nonempty and printable, paths are unique and declared.
    pub fn check(&self, def: &TypeDef) -> Result<(), WysiwysError> {
        let bad = |m: String| Err(WysiwysError::BadMapping(m));
        for (i, e) in self.entries.iter().enumerate() {
            if e.label.trim().is_empty() || e.label.chars().any(non_printable) || e.label.contains(':') {
                return bad(format!("bad label for {}", e.path));
            }
            if self.entries[..i].iter().any(|o| o.path == e.path) {
                return bad(format!("{} mapped twice", e.path));
            }
            let declared = match e.path.rsplit_once("/@") {
                Some((el, attr)) => def
                    .get(el)
                    .is_some_and(|s| s.attributes.iter().any(|a| a.name == attr)),
                None => def.get(&e.path).is_some_and(|s| s.text_allowed),
            };
            if !declared {
                return bad(format!("{} is not a declared text field or attribute", e.path));
            }
        }
        Ok(())
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("display");
        for d in &self.entries {
            e.push(
                Element::new("entry")
                    .attr("path", &d.path)
                    .attr("label", &d.label)
                    .attr("format", d.format.tag()),
            );
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, WysiwysError> {
        let bad = |m: String| WysiwysError::BadMapping(m);
        if e.name != "display" {
            return Err(bad("expected <display>".into()));
        }
        let mut entries = Vec::new();
        for d in e.elements() {
            if d.name != "entry" {
                return Err(bad(format!("unexpected <{}>", d.name)));
            }
            let get = |n: &str| d.get_attr(n).ok_or_else(|| bad(format!("<entry> lacks `{n}`")));
            entries.push(DisplayEntry {
                path: get("path")?.to_string(),
                label: get("label")?.to_string(),
                format: d.get_attr("format").unwrap_or("text").parse().map_err(bad)?,
            });
        }
        Ok(DisplayMapping { entries })
    }
}

/// Characters never shown: the forbidden set plus every other control or
/// line/paragraph separator, so one value always occupies one line.
fn non_printable(c: char) -> bool {
    crate::xml::is_forbidden_char(c) || c.is_control() || matches!(c, '\u{2028}' | '\u{2029}')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplayForm {
    pub header: Vec<(String, String)>,
    pub body: Vec<(String, String)>,
}

impl DisplayForm {
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (l, v) in &self.header {
            out.push_str(&format!("{l}: {v}\n"));
        }
        out.push('\n');
        for (l, v) in &self.body {
            out.push_str(&format!("{l}: {v}\n"));
        }
        out
    }

    pub fn render_digest(&self) -> String {
        sha256_hex(self.serialize().as_bytes())
    }

    pub fn body_values(&self) -> impl Iterator<Item = &str> {
        self.body.iter().map(|(_, v)| v.as_str())
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("DisplayForm").attr("renderDigest", self.render_digest());
        for (l, v) in &self.header {
            e.push(Element::with_text("header", v).attr("label", l));
        }
        for (l, v) in &self.body {
            e.push(Element::with_text("line", v).attr("label", l));
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, WysiwysError> {
        let mut form = DisplayForm {
            header: Vec::new(),
            body: Vec::new(),
        };
        for c in e.elements() {
            let pair = (c.get_attr("label").unwrap_or("").to_string(), c.text());
            match c.name.as_str() {
                "header" => form.header.push(pair),
                "line" => form.body.push(pair),
                other => return Err(WysiwysError::Malformed(format!("unexpected <{other}> in form"))),
            }
        }
        if e.get_attr("renderDigest") != Some(form.render_digest().as_str()) {
            return Err(WysiwysError::Malformed("renderDigest does not match the form".into()));
        }
        Ok(form)
    }
}

fn scan_chars(content: &Element) -> Result<(), WysiwysError> {
    let mut found = None;
    content.walk(&mut |path, e| {
        if found.is_some() {
            return;
        }
        for (n, v) in &e.attrs {
            if let Some(ch) = v.chars().find(|c| non_printable(*c)) {
                found = Some(WysiwysError::ForbiddenChar {
                    ch,
                    path: format!("{path}/@{n}"),
                });
                return;
            }
        }
        if !e.has_element_children() {
            if let Some(ch) = e.text().chars().find(|c| non_printable(*c)) {
                found = Some(WysiwysError::ForbiddenChar { ch, path: path.to_string() });
            }
        }
    });
    found.map_or(Ok(()), Err)
}

/// Whitespace between child elements is layout, not content.
fn carries_text(e: &Element) -> bool {
    let text = e.text();
    if e.has_element_children() {
        !text.chars().all(|c| matches!(c, ' ' | '\t' | '\n' | '\r'))
    } else {
        !text.is_empty()
    }
}

fn scan_unmapped(content: &Element, mapping: &DisplayMapping) -> Result<(), WysiwysError> {
    let mut found = None;
    content.walk(&mut |path, e| {
        if found.is_some() {
            return;
        }
        for (n, _) in &e.attrs {
            let p = format!("{path}/@{n}");
            if mapping.entry(&p).is_none() {
                found = Some(p);
                return;
            }
        }
        if carries_text(e) && mapping.entry(path).is_none() {
            found = Some(path.to_string());
        }
    });
    found.map_or(Ok(()), |p| Err(WysiwysError::Unmapped(p)))
}

/// Renders `content` completely or refuses it.
///
/// Checks run in a fixed order: forbidden and non-printable characters,
/// unmapped content, structure, then value formats.
pub fn build_display(content: &Element, def: &TypeDef, mapping: &DisplayMapping) -> Result<DisplayForm, WysiwysError> {
    check_tree(content)?;
    scan_chars(content)?;
    scan_unmapped(content, mapping)?;
    let report = def.validate_structure(content);
    if !report.is_ok() {
        return Err(WysiwysError::StructureInvalid(report));
    }
    let mut body = Vec::new();
    for entry in &mapping.entries {
        let (element, attr) = match entry.path.rsplit_once("/@") {
            Some((el, a)) => (el, Some(a)),
            None => (entry.path.as_str(), None),
        };
        for e in content.select(element) {
            let value = match attr {
                Some(a) => match e.get_attr(a) {
                    Some(v) => v.to_string(),
                    None => continue,
                },
                None => e.text(),
            };
            if attr.is_none() && value.is_empty() {
                continue;
            }
            if !entry.format.accepts(&value) {
                return Err(WysiwysError::FormatMismatch {
                    path: entry.path.clone(),
                    format: entry.format,
                });
            }
            body.push((entry.label.clone(), value));
        }
    }
    Ok(DisplayForm {
        header: vec![
            ("Document type".into(), def.type_id.clone()),
            ("Definition version".into(), def.version.to_string()),
        ],
        body,
    })
}

fn check_binding(header: &EDocHeader, bundle: &DefinitionBundle) -> Result<(), WysiwysError> {
    if header.type_id != bundle.type_id() || header.version != bundle.version() {
        return Err(WysiwysError::DefinitionMismatch(format!(
            "document is {} v{}, definition is {} v{}",
            header.type_id,
            header.version,
            bundle.type_id(),
            bundle.version()
        )));
    }
    if header.def_digest != bundle.digest() {
        return Err(WysiwysError::DefinitionMismatch(
            "defDigest does not match the registered definition".into(),
        ));
    }
    Ok(())
}

/// Result of a successful render: the form the signer saw and the exact
/// canonical bytes that a signature will cover. Only this module can
/// construct one.
#[derive(Debug, Clone)]
pub struct SignableContent {
    header: EDocHeader,
    content: Element,
    form: DisplayForm,
    bytes: Vec<u8>,
}

impl SignableContent {
    pub fn form(&self) -> &DisplayForm {
        &self.form
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn header(&self) -> &EDocHeader {
        &self.header
    }

    pub fn content(&self) -> &Element {
        &self.content
    }

    pub fn render_digest(&self) -> String {
        self.form.render_digest()
    }
}

/// Renders a draft for signing. The returned bytes are `a_canon(content)`.
pub fn render_to_sign(draft: &Draft, bundle: &DefinitionBundle) -> Result<SignableContent, WysiwysError> {
    check_binding(&draft.header, bundle)?;
    let mut form = build_display(&draft.content, &bundle.typedef, &bundle.display)?;
    form.header.push(("Definition digest".into(), bundle.digest()));
    form.header.push(("Created".into(), time::format(&draft.header.created_at)));
    Ok(SignableContent {
        header: draft.header.clone(),
        bytes: a_canon(&draft.content),
        content: draft.content.clone(),
        form,
    })
}

/// Parses raw draft bytes, looks up the bundle and renders. The single
/// entry point for tools that sign files.
pub fn prepare_signing(bytes: &[u8], defs: &dyn Definitions) -> Result<SignableContent, WysiwysError> {
    let draft = Draft::from_xml(&parse(bytes)?)?;
    let bundle = defs
        .bundle(&draft.header.type_id, draft.header.version)
        .ok_or_else(|| WysiwysError::UnknownType(format!("{} v{}", draft.header.type_id, draft.header.version)))?;
    render_to_sign(&draft, &bundle)
}

/// Signs rendered content. This is the only way to produce a signed e-doc.
pub fn sign_rendered(rendered: &SignableContent, signer: &Signer, at: Timestamp) -> Result<EDoc, SigError> {
    let signature = signer.sign_bytes(
        &rendered.bytes,
        DigestAlg::Sha256,
        Purpose::Sign,
        at,
        rendered.header.properties(),
    )?;
    Ok(EDoc {
        header: rendered.header.clone(),
        signed: SignedDoc {
            content: rendered.content.clone(),
            signature,
        },
    })
}

/// Verifies a signed e-doc and renders it with an explicit verdict line.
///
/// The verdict is VALID only if every signature verifies and chains to a
/// trust anchor, the primary signature uses a signing key and it covers the
/// header binding.
pub fn verify_and_render(
    doc: &EDoc,
    bundle: &DefinitionBundle,
    trust: &TrustStore,
    at: &Timestamp,
) -> Result<(DisplayForm, EnvelopeReport), WysiwysError> {
    check_binding(&doc.header, bundle)?;
    let mut form = build_display(doc.content(), &bundle.typedef, &bundle.display)?;
    let report = verify_envelope(&doc.signed, trust, at);
    let valid = report.is_valid() && doc.header_is_signed() && report.primary.purpose == Purpose::Sign;
    let mut header = vec![("Verification".to_string(), if valid { "VALID" } else { "INVALID" }.to_string())];
    header.append(&mut form.header);
    header.push(("Signer".into(), report.primary.signer.clone()));
    header.push((
        "Signature".into(),
        if report.primary.signature_valid { "valid" } else { "invalid" }.into(),
    ));
    header.push((
        "Certificate chain".into(),
        match &report.primary.chain {
            Ok(()) => "trusted".into(),
            Err(e) => e.code().to_string(),
        },
    ));
    header.push(("Signed at".into(), time::format(&report.primary.timestamp)));
    for (i, c) in report.counter_signatures.iter().enumerate() {
        header.push((
            format!("Counter-signature {}", i + 1),
            format!(
                "{} {} {} {}",
                c.signer,
                c.digest_alg.tag(),
                if c.is_valid() { "valid" } else { "invalid" },
                time::format(&c.timestamp)
            ),
        ));
    }
    form.header = header;
    Ok((form, report))
}
