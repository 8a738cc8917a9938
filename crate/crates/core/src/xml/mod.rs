//! Strict XML subset: tree model, parser and the canonical byte form.
//!
//! The accepted language is deliberately small. There are no namespaces,
//! comments, processing instructions, CDATA sections or DOCTYPE
//! declarations, and the input must be UTF-8 in Unicode NFC without any
//! character from [`is_forbidden_char`]. Anything outside the subset is an
//! error, never silently dropped: a signer must be able to see everything
//! that ends up inside the signed bytes.

mod canon;
mod parse;
pub mod typedef;

pub use canon::{a_canon, a_canon_string};
pub use parse::{check_tree, parse, parse_str};
pub use typedef::{AttrSpec, ElementSpec, TypeDef, ValidationReport, Violation, ViolationKind};

use std::fmt;

use thiserror::Error;

/// Constructs that are syntactically XML but never allowed in the subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construct {
    Comment,
    ProcessingInstruction,
    CData,
    Doctype,
    Namespace,
}

impl fmt::Display for Construct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Construct::Comment => "comment",
            Construct::ProcessingInstruction => "processing instruction",
            Construct::CData => "CDATA section",
            Construct::Doctype => "DOCTYPE declaration",
            Construct::Namespace => "namespace declaration",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XmlError {
    #[error("malformed XML at byte {offset}: {message}")]
    MalformedXml { offset: usize, message: String },
    #[error("forbidden construct ({construct}) at byte {offset}")]
    ForbiddenConstruct { construct: Construct, offset: usize },
    #[error("forbidden character U+{:04X} at byte {offset}", *.ch as u32)]
    ForbiddenChar { ch: char, offset: usize },
    #[error("input is not in Unicode normalization form C")]
    NotNfc,
}

impl XmlError {
    /// Short stable name of the error family, used in CLI and wire error payloads.
    pub fn family(&self) -> &'static str {
        match self {
            XmlError::MalformedXml { .. } => "MalformedXml",
            XmlError::ForbiddenConstruct { .. } => "ForbiddenConstruct",
            XmlError::ForbiddenChar { .. } => "ForbiddenChar",
            XmlError::NotNfc => "NotNfc",
        }
    }
}

/// Characters that are rejected anywhere in a document.
///
/// C0 controls other than TAB, LF and CR, DEL, the zero-width and
/// directional marks U+200B..=U+200F, the bidi embedding/override controls
/// U+202A..=U+202E, WORD JOINER and the BOM / zero-width no-break space.
pub fn is_forbidden_char(c: char) -> bool {
    matches!(c,
        '\u{0}'..='\u{8}' | '\u{B}' | '\u{C}' | '\u{E}'..='\u{1F}' | '\u{7F}'
        | '\u{200B}'..='\u{200F}'
        | '\u{202A}'..='\u{202E}'
        | '\u{2060}'
        | '\u{FEFF}')
}

/// The full forbidden set, for exhaustive tests.
pub fn forbidden_chars() -> impl Iterator<Item = char> {
    (0u32..=0x7F)
        .chain(0x200B..=0x200F)
        .chain(0x202A..=0x202E)
        .chain([0x2060, 0xFEFF])
        .filter_map(char::from_u32)
        .filter(|c| is_forbidden_char(*c))
}

pub(crate) fn is_xml_whitespace(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\n' | '\r')
}

pub(crate) fn is_whitespace_only(s: &str) -> bool {
    s.chars().all(is_xml_whitespace)
}

/// `[A-Za-z][A-Za-z0-9_.-]*`
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

/// A node of the document tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XNode {
    Element(Element),
    Text(String),
}

impl XNode {
    pub fn as_element(&self) -> Option<&Element> {
        match self {
            XNode::Element(e) => Some(e),
            XNode::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            XNode::Text(t) => Some(t),
            XNode::Element(_) => None,
        }
    }
}

impl From<Element> for XNode {
    fn from(e: Element) -> Self {
        XNode::Element(e)
    }
}

/// An element with ordered attributes and children.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<XNode>,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element {
            name: name.into(),
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    /// Leaf element holding a single text node.
    pub fn with_text(name: impl Into<String>, text: impl Into<String>) -> Self {
        let mut e = Element::new(name);
        e.push_text(text);
        e
    }

    pub fn attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.set_attr(name, value);
        self
    }

    pub fn child(mut self, child: Element) -> Self {
        self.children.push(XNode::Element(child));
        self
    }

    pub fn set_attr(&mut self, name: impl Into<String>, value: impl Into<String>) {
        let name = name.into();
        let value = value.into();
        match self.attrs.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = value,
            None => self.attrs.push((name, value)),
        }
    }

    pub fn get_attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, child: Element) {
        self.children.push(XNode::Element(child));
    }

    pub fn push_text(&mut self, text: impl Into<String>) {
        let text = text.into();
        if !text.is_empty() {
            self.children.push(XNode::Text(text));
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(XNode::as_element)
    }

    pub fn elements_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.elements().filter(move |e| e.name == name)
    }

    pub fn first(&self, name: &str) -> Option<&Element> {
        self.elements().find(|e| e.name == name)
    }

    pub fn first_mut(&mut self, name: &str) -> Option<&mut Element> {
        self.children.iter_mut().find_map(|c| match c {
            XNode::Element(e) if e.name == name => Some(e),
            _ => None,
        })
    }

    pub fn has_element_children(&self) -> bool {
        self.children.iter().any(|c| matches!(c, XNode::Element(_)))
    }

    /// Concatenation of the direct text children.
    pub fn text(&self) -> String {
        self.children.iter().filter_map(XNode::as_text).collect()
    }

    /// Text of the first child element with this name.
    pub fn child_text(&self, name: &str) -> Option<String> {
        self.first(name).map(Element::text)
    }

    /// Resolves an absolute path such as `/eEAC/student/id` against this
    /// element as the root, returning every matching element in document order.
    pub fn select(&self, path: &str) -> Vec<&Element> {
        let mut steps = path.trim_start_matches('/').split('/');
        match steps.next() {
            Some(root) if root == self.name => {}
            _ => return Vec::new(),
        }
        let mut current = vec![self];
        for step in steps {
            current = current
                .into_iter()
                .flat_map(|e| e.elements().filter(move |c| c.name == step))
                .collect();
        }
        current
    }

    /// Text of the first element at `path`, if present.
    pub fn select_text(&self, path: &str) -> Option<String> {
        self.select(path).first().map(|e| e.text())
    }

    /// Visits every element together with its absolute path.
    pub fn walk<'a, F: FnMut(&str, &'a Element)>(&'a self, visit: &mut F) {
        fn go<'a, F: FnMut(&str, &'a Element)>(e: &'a Element, path: &mut String, visit: &mut F) {
            let len = path.len();
            path.push('/');
            path.push_str(&e.name);
            visit(path, e);
            for c in e.elements() {
                go(c, path, visit);
            }
            path.truncate(len);
        }
        go(self, &mut String::new(), visit);
    }}
