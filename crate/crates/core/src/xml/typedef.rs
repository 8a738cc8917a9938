//! Closed structure definitions for e-doc types and validation against them.

use std::fmt;

use indexmap::IndexMap;
use regex::Regex;
use thiserror::Error;

use super::{is_valid_name, is_whitespace_only, Element, XNode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid type definition: {0}")]
pub struct DefinitionError(pub String);

/// A full-match regular expression kept together with its source text.
#[derive(Clone)]
pub struct Pattern {
    source: String,
    regex: Regex,
}

impl Pattern {
    pub fn new(source: &str) -> Result<Self, DefinitionError> {
        let regex = Regex::new(&format!("^(?:{source})$"))
            .map_err(|e| DefinitionError(format!("bad pattern `{source}`: {e}")))?;
        Ok(Pattern {
            source: source.to_string(),
            regex,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn matches(&self, value: &str) -> bool {
        self.regex.is_match(value)
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({:?})", self.source)
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Eq for Pattern {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrSpec {
    pub name: String,
    pub required: bool,
    pub pattern: Option<Pattern>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementSpec {
    /// Must be present whenever its parent is present.
    pub required: bool,
    pub repeatable: bool,
    /// Text-bearing elements are leaves.
    pub text_allowed: bool,
    pub text_pattern: Option<Pattern>,
    pub attributes: Vec<AttrSpec>,
}

impl ElementSpec {
    pub fn container() -> Self {
        ElementSpec {
            required: true,
            repeatable: false,
            text_allowed: false,
            text_pattern: None,
            attributes: Vec::new(),
        }
    }

    pub fn leaf(pattern: Option<&str>) -> Result<Self, DefinitionError> {
        Ok(ElementSpec {
            text_allowed: true,
            text_pattern: pattern.map(Pattern::new).transpose()?,
            ..ElementSpec::container()
        })
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }

    pub fn repeatable(mut self) -> Self {
        self.repeatable = true;
        self
    }
}

/// Structure definition of one e-doc type version.
///
/// Element paths are absolute (`/eEAC/student/id`) and kept in declaration
/// order; a parent is always declared before its children. Anything not
/// declared is illegal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDef {
    pub type_id: String,
    pub version: u32,
    pub root: String,
    elements: IndexMap<String, ElementSpec>,
}

impl TypeDef {
    pub fn new(type_id: &str, version: u32, root: &str) -> Result<Self, DefinitionError> {
        if type_id.is_empty() || !is_valid_name(type_id) {
            return Err(DefinitionError(format!("bad typeId `{type_id}`")));
        }
        if version == 0 {
            return Err(DefinitionError("version must be at least 1".into()));
        }
        if !is_valid_name(root) {
            return Err(DefinitionError(format!("bad root name `{root}`")));
        }
        let mut elements = IndexMap::new();
        elements.insert(format!("/{root}"), ElementSpec::container());
        Ok(TypeDef {
            type_id: type_id.to_string(),
            version,
            root: root.to_string(),
            elements,
        })
    }

    pub fn root_path(&self) -> String {
        format!("/{}", self.root)
    }

    /// Declares an element. The parent must already be declared and must not
    /// be text-bearing.
    pub fn add(&mut self, path: &str, spec: ElementSpec) -> Result<(), DefinitionError> {
        if path == self.root_path() {
            if spec.required && !spec.repeatable {
                self.elements.insert(path.to_string(), spec);
                return Ok(());
            }
            return Err(DefinitionError("root must be required and single".into()));
        }
        let (parent, name) = path
            .rsplit_once('/')
            .ok_or_else(|| DefinitionError(format!("bad path `{path}`")))?;
        if !is_valid_name(name) {
            return Err(DefinitionError(format!("bad element name in `{path}`")));
        }
        if self.elements.contains_key(path) {
            return Err(DefinitionError(format!("duplicate path `{path}`")));
        }
        match self.elements.get(parent) {
            None => {
                return Err(DefinitionError(format!(
                    "`{path}` is not reachable from the root"
                )))
            }
            Some(p) if p.text_allowed => {
                return Err(DefinitionError(format!(
                    "`{parent}` is text-bearing and cannot have children"
                )))
            }
            Some(_) => {}
        }
        for (i, a) in spec.attributes.iter().enumerate() {
            if !is_valid_name(&a.name) || spec.attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(DefinitionError(format!(
                    "bad or duplicate attribute `{}` on `{path}`",
                    a.name
                )));
            }
        }
        self.elements.insert(path.to_string(), spec);
        Ok(())
    }

    pub fn get(&self, path: &str) -> Option<&ElementSpec> {
        self.elements.get(path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.elements.contains_key(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = (&str, &ElementSpec)> {
        self.elements.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Declared children of `path`, in declaration order.
    pub fn children_of<'a>(&'a self, path: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.elements.keys().filter_map(move |k| {
            k.strip_prefix(path)
                .and_then(|rest| rest.strip_prefix('/'))
                .filter(|rest| !rest.contains('/'))
                .map(|_| k.as_str())
        })
    }

    pub fn text_paths(&self) -> impl Iterator<Item = &str> {
        self.elements
            .iter()
            .filter(|(_, s)| s.text_allowed)
            .map(|(k, _)| k.as_str())
    }

    /// Text-bearing paths that every valid instance must contain: the leaf
    /// and all its ancestors are required.
    pub fn required_text_paths(&self) -> Vec<&str> {
        self.text_paths()
            .filter(|p| self.required_chain(p))
            .collect()
    }

    fn required_chain(&self, path: &str) -> bool {
        let mut p = path;
        loop {
            match self.elements.get(p) {
                Some(s) if s.required => {}
                _ => return false,
            }
            match p.rsplit_once('/') {
                Some((parent, _)) if !parent.is_empty() => p = parent,
                _ => return true,
            }
        }
    }

    /// Normalizes `student/id` or `/eEAC/student/id` to the absolute form.
    pub fn absolute(&self, path: &str) -> String {
        if path.starts_with('/') {
            path.to_string()
        } else {
            format!("/{}/{}", self.root, path)
        }
    }

    pub fn from_xml(e: &Element) -> Result<Self, DefinitionError> {
        if e.name != "typedef" {
            return Err(DefinitionError(format!(
                "expected <typedef>, found <{}>",
                e.name
            )));
        }
        let attr = |name: &str| {
            e.get_attr(name)
                .ok_or_else(|| DefinitionError(format!("<typedef> lacks `{name}`")))
        };
        let version = attr("version")?
            .parse()
            .map_err(|_| DefinitionError("bad version".into()))?;
        let mut def = TypeDef::new(attr("typeId")?, version, attr("root")?)?;
        for el in e.elements() {
            if el.name != "element" {
                return Err(DefinitionError(format!("unexpected <{}>", el.name)));
            }
            let path = el
                .get_attr("path")
                .ok_or_else(|| DefinitionError("<element> lacks `path`".into()))?;
            let flag = |name: &str, default: bool| match el.get_attr(name) {
                None => Ok(default),
                Some("true") => Ok(true),
                Some("false") => Ok(false),
                Some(v) => Err(DefinitionError(format!("bad boolean `{v}` for `{name}`"))),
            };
            let mut attributes = Vec::new();
            for a in el.elements() {
                if a.name != "attribute" {
                    return Err(DefinitionError(format!("unexpected <{}>", a.name)));
                }
                attributes.push(AttrSpec {
                    name: a
                        .get_attr("name")
                        .ok_or_else(|| DefinitionError("<attribute> lacks `name`".into()))?
                        .to_string(),
                    required: a.get_attr("required") != Some("false"),
                    pattern: a.get_attr("pattern").map(Pattern::new).transpose()?,
                });
            }
            let text_allowed = flag("text", false)?;
            let text_pattern = el.get_attr("pattern").map(Pattern::new).transpose()?;
            if text_pattern.is_some() && !text_allowed {
                return Err(DefinitionError(format!(
                    "`{path}` has a pattern but no text"
                )));
            }
            let spec = ElementSpec {
                required: flag("required", true)?,
                repeatable: flag("repeatable", false)?,
                text_allowed,
                text_pattern,
                attributes,
            };
            def.add(path, spec)?;
        }
        Ok(def)
    }

    pub fn to_xml(&self) -> Element {
        let mut root = Element::new("typedef")
            .attr("typeId", &self.type_id)
            .attr("version", self.version.to_string())
            .attr("root", &self.root);
        for (path, spec) in &self.elements {
            let mut el = Element::new("element")
                .attr("path", path)
                .attr("required", spec.required.to_string())
                .attr("repeatable", spec.repeatable.to_string())
                .attr("text", spec.text_allowed.to_string());
            if let Some(p) = &spec.text_pattern {
                el.set_attr("pattern", p.source());
            }
            for a in &spec.attributes {
                let mut ae = Element::new("attribute")
                    .attr("name", &a.name)
                    .attr("required", a.required.to_string());
                if let Some(p) = &a.pattern {
                    ae.set_attr("pattern", p.source());
                }
                el.push(ae);
            }
            root.push(el);
        }
        root
    }

    /// Checks `node` against this definition. Never fails; problems are
    /// reported as violations with their element paths.
    pub fn validate_structure(&self, node: &Element) -> ValidationReport {
        let mut violations = Vec::new();
        let path = format!("/{}", node.name);
        if node.name != self.root {
            violations.push(Violation::new(&path, ViolationKind::WrongRoot));
        } else {
            self.check_element(node, &path, &mut violations);
        }
        ValidationReport { violations }
    }

    fn check_element(&self, e: &Element, path: &str, out: &mut Vec<Violation>) {
        let spec = &self.elements[path];
        for (name, value) in &e.attrs {
            let at = format!("{path}/@{name}");
            match spec.attributes.iter().find(|a| &a.name == name) {
                None => out.push(Violation::new(&at, ViolationKind::UnknownAttribute)),
                Some(a) => {
                    if let Some(p) = &a.pattern {
                        if !p.matches(value) {
                            out.push(Violation::new(&at, ViolationKind::PatternMismatch));
                        }
                    }
                }
            }
        }
        for a in spec.attributes.iter().filter(|a| a.required) {
            if e.get_attr(&a.name).is_none() {
                out.push(Violation::new(
                    &format!("{path}/@{}", a.name),
                    ViolationKind::MissingAttribute,
                ));
            }
        }

        if spec.text_allowed {
            if let Some(p) = &spec.text_pattern {
                if !p.matches(&e.text()) {
                    out.push(Violation::new(path, ViolationKind::PatternMismatch));
                }
            }
        } else if e
            .children
            .iter()
            .any(|c| matches!(c, XNode::Text(t) if !is_whitespace_only(t)))
        {
            out.push(Violation::new(path, ViolationKind::TextNotAllowed));
        }

        let mut seen: IndexMap<&str, usize> = IndexMap::new();
        for child in e.elements() {
            let child_path = format!("{path}/{}", child.name);
            let count = seen.entry(child.name.as_str()).or_insert(0);
            *count += 1;
            match self.elements.get(&child_path) {
                None => out.push(Violation::new(&child_path, ViolationKind::UnknownElement)),
                Some(child_spec) => {
                    if *count == 2 && !child_spec.repeatable {
                        out.push(Violation::new(&child_path, ViolationKind::NotRepeatable));
                    }
                    self.check_element(child, &child_path, out);
                }
            }
        }
        for child_path in self.children_of(path) {
            let name = &child_path[path.len() + 1..];
            if self.elements[child_path].required && !seen.contains_key(name) {
                out.push(Violation::new(child_path, ViolationKind::MissingRequired));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    WrongRoot,
    UnknownElement,
    MissingRequired,
    NotRepeatable,
    TextNotAllowed,
    PatternMismatch,
    UnknownAttribute,
    MissingAttribute,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl Violation {
    fn new(path: &str, kind: ViolationKind) -> Self {
        Violation {
            path: path.to_string(),
            kind,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.kind, self.path)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}
