//! Definition bundles: everything the platform knows about one e-doc type
//! version, stored as four XML files in a directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::digest::sha256_hex;
use crate::edoc::{AttributeSet, EdocError, ProcessingRules, TransitionTable, STATUS};
use crate::wysiwys::DisplayMapping;
use crate::xml::{a_canon, parse, Element, TypeDef, XmlError};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{file}: {source}")]
    Xml { file: String, source: XmlError },
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
}

impl From<EdocError> for BundleError {
    fn from(e: EdocError) -> Self {
        BundleError::Inconsistent(e.to_string())
    }
}

impl From<crate::xml::typedef::DefinitionError> for BundleError {
    fn from(e: crate::xml::typedef::DefinitionError) -> Self {
        BundleError::Inconsistent(e.0)
    }
}

fn inconsistent(m: impl Into<String>) -> BundleError {
    BundleError::Inconsistent(m.into())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpec {
    pub name: String,
    pub initial: bool,
    /// Documents in this state pass the status check.
    pub valid: bool,
}

/// Content paths holding the validity window, as RFC 3339 timestamps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityPaths {
    pub not_before: String,
    pub not_after: String,
}

/// Lifecycle and directory metadata of a type (`meta.xml`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BundleMeta {
    pub states: Vec<StateSpec>,
    pub transitions: TransitionTable,
    pub validity: Option<ValidityPaths>,
    pub static_attrs: BTreeMap<String, String>,
    /// Dynamic attributes other than `status`, with their initial values.
    pub dynamic_attrs: BTreeMap<String, String>,
    /// Content paths returned by search results.
    pub summary: Vec<String>,
}

impl BundleMeta {
    pub fn initial_state(&self) -> Option<&str> {
        self.states.iter().find(|s| s.initial).map(|s| s.name.as_str())
    }

    pub fn state(&self, name: &str) -> Option<&StateSpec> {
        self.states.iter().find(|s| s.name == name)
    }

    /// Attributes a freshly stored document starts with.
    pub fn initial_attributes(&self) -> AttributeSet {
        let mut dynamic = self.dynamic_attrs.clone();
        if let Some(s) = self.initial_state() {
            dynamic.insert(STATUS.to_string(), s.to_string());
        }
        AttributeSet {
            static_attrs: self.static_attrs.clone(),
            dynamic,
        }
    }

    pub fn is_attribute(&self, name: &str) -> bool {
        name == STATUS || self.static_attrs.contains_key(name) || self.dynamic_attrs.contains_key(name)
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("meta");
        for s in &self.states {
            e.push(
                Element::new("state")
                    .attr("name", &s.name)
                    .attr("initial", s.initial.to_string())
                    .attr("valid", s.valid.to_string()),
            );
        }
        for (from, to) in self.transitions.edges() {
            e.push(Element::new("transition").attr("from", from).attr("to", to));
        }
        if let Some(v) = &self.validity {
            e.push(
                Element::new("validity")
                    .attr("notBefore", &v.not_before)
                    .attr("notAfter", &v.not_after),
            );
        }
        for (k, v) in &self.static_attrs {
            e.push(Element::new("static").attr("name", k).attr("value", v));
        }
        for (k, v) in &self.dynamic_attrs {
            e.push(Element::new("dynamic").attr("name", k).attr("value", v));
        }
        for p in &self.summary {
            e.push(Element::new("summary").attr("path", p));
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, BundleError> {
        if e.name != "meta" {
            return Err(inconsistent("expected <meta>"));
        }
        let attr = |el: &Element, name: &str| {
            el.get_attr(name)
                .map(str::to_string)
                .ok_or_else(|| inconsistent(format!("<{}> lacks `{name}`", el.name)))
        };
        let mut meta = BundleMeta::default();
        let mut edges = Vec::new();
        for c in e.elements() {
            match c.name.as_str() {
                "state" => meta.states.push(StateSpec {
                    name: attr(c, "name")?,
                    initial: c.get_attr("initial") == Some("true"),
                    valid: c.get_attr("valid") == Some("true"),
                }),
                "transition" => edges.push((attr(c, "from")?, attr(c, "to")?)),
                "validity" => {
                    meta.validity = Some(ValidityPaths {
                        not_before: attr(c, "notBefore")?,
                        not_after: attr(c, "notAfter")?,
                    })
                }
                "static" => {
                    meta.static_attrs.insert(attr(c, "name")?, attr(c, "value")?);
                }
                "dynamic" => {
                    meta.dynamic_attrs.insert(attr(c, "name")?, attr(c, "value")?);
                }
                "summary" => meta.summary.push(attr(c, "path")?),
                other => return Err(inconsistent(format!("unexpected <{other}> in meta"))),
            }
        }
        meta.transitions = TransitionTable::new(edges)?;
        Ok(meta)
    }
}

/// Structure definition, display mapping, optional processing rules and
/// lifecycle metadata of one type version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefinitionBundle {
    pub typedef: TypeDef,
    pub display: DisplayMapping,
    /// Rules producing this type from another one.
    pub rules: Option<ProcessingRules>,
    pub meta: BundleMeta,
}

impl DefinitionBundle {
    pub fn new(
        typedef: TypeDef,
        display: DisplayMapping,
        rules: Option<ProcessingRules>,
        meta: BundleMeta,
    ) -> Result<Self, BundleError> {
        let b = DefinitionBundle {
            typedef,
            display,
            rules,
            meta,
        };
        b.check()?;
        Ok(b)
    }

    pub fn type_id(&self) -> &str {
        &self.typedef.type_id
    }

    pub fn version(&self) -> u32 {
        self.typedef.version
    }

    fn check(&self) -> Result<(), BundleError> {
        self.display.check(&self.typedef).map_err(|e| inconsistent(e.to_string()))?;
        if let Some(r) = &self.rules {
            r.check_output(&self.typedef)?;
        }
        let m = &self.meta;
        let mut names = BTreeSet::new();
        for s in &m.states {
            if !names.insert(s.name.as_str()) {
                return Err(inconsistent(format!("duplicate state {}", s.name)));
            }
        }
        if m.states.iter().filter(|s| s.initial).count() != 1 {
            return Err(inconsistent("exactly one initial state is required"));
        }
        for (a, b) in m.transitions.edges() {
            if !names.contains(a) || !names.contains(b) {
                return Err(inconsistent(format!("transition {a} -> {b} uses an undeclared state")));
            }
        }
        let text_path = |p: &str| self.typedef.get(p).is_some_and(|s| s.text_allowed);
        if let Some(v) = &m.validity {
            for p in [&v.not_before, &v.not_after] {
                if !text_path(p) {
                    return Err(inconsistent(format!("validity path {p} is not a text field")));
                }
            }
        }
        for p in &m.summary {
            if !text_path(p) {
                return Err(inconsistent(format!("summary path {p} is not a text field")));
            }
        }
        if m.static_attrs.contains_key(STATUS) || m.dynamic_attrs.contains_key(STATUS) {
            return Err(inconsistent("`status` is managed by the lifecycle"));
        }
        if let Some(k) = m.static_attrs.keys().find(|k| m.dynamic_attrs.contains_key(*k)) {
            return Err(inconsistent(format!("attribute {k} is both static and dynamic")));
        }
        Ok(())
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("bundle")
            .attr("typeId", self.type_id())
            .attr("version", self.version().to_string())
            .child(self.typedef.to_xml())
            .child(self.display.to_xml());
        if let Some(r) = &self.rules {
            e.push(r.to_xml());
        }
        e.push(self.meta.to_xml());
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, BundleError> {
        if e.name != "bundle" {
            return Err(inconsistent("expected <bundle>"));
        }
        let part = |name: &str| e.first(name).ok_or_else(|| inconsistent(format!("bundle lacks <{name}>")));
        let typedef = TypeDef::from_xml(part("typedef")?)?;
        if e.get_attr("typeId") != Some(typedef.type_id.as_str())
            || e.get_attr("version") != Some(typedef.version.to_string().as_str())
        {
            return Err(inconsistent("bundle header does not match its typedef"));
        }
        Self::new(
            typedef,
            DisplayMapping::from_xml(part("display")?).map_err(|e| inconsistent(e.to_string()))?,
            e.first("rules").map(ProcessingRules::from_xml).transpose()?,
            BundleMeta::from_xml(part("meta")?)?,
        )
    }

    /// Hex SHA-256 of the canonical bundle; e-doc headers carry this value.
    pub fn digest(&self) -> String {
        sha256_hex(&a_canon(&self.to_xml()))
    }

    pub fn load_dir(dir: &Path) -> Result<Self, BundleError> {
        let read = |name: &str| -> Result<Option<Element>, BundleError> {
            let path = dir.join(name);
            if !path.exists() {
                return Ok(None);
            }
            let bytes = fs::read(&path)?;
            parse(&bytes).map(Some).map_err(|source| BundleError::Xml {
                file: path.display().to_string(),
                source,
            })
        };
        let need = |name: &str| -> Result<Element, BundleError> {
            read(name)?.ok_or_else(|| inconsistent(format!("{} missing in {}", name, dir.display())))
        };
        Self::new(
            TypeDef::from_xml(&need("typedef.xml")?)?,
            DisplayMapping::from_xml(&need("display.xml")?).map_err(|e| inconsistent(e.to_string()))?,
            read("rules.xml")?.as_ref().map(ProcessingRules::from_xml).transpose()?,
            BundleMeta::from_xml(&need("meta.xml")?)?,
        )
    }

    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("typedef.xml"), a_canon(&self.typedef.to_xml()))?;
        fs::write(dir.join("display.xml"), a_canon(&self.display.to_xml()))?;
        if let Some(r) = &self.rules {
            fs::write(dir.join("rules.xml"), a_canon(&r.to_xml()))?;
        }
        fs::write(dir.join("meta.xml"), a_canon(&self.meta.to_xml()))?;
        Ok(())
    }
}

/// Lookup of registered bundles.
pub trait Definitions {
    fn bundle(&self, type_id: &str, version: u32) -> Option<Arc<DefinitionBundle>>;
    fn latest(&self, type_id: &str) -> Option<Arc<DefinitionBundle>>;
}

/// In-memory bundle set keyed by (typeId, version).
#[derive(Debug, Clone, Default)]
pub struct DefinitionSet {
    bundles: BTreeMap<(String, u32), Arc<DefinitionBundle>>,
}

impl DefinitionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a bundle. Returns false if that version is already present.
    pub fn insert(&mut self, bundle: DefinitionBundle) -> bool {
        let key = (bundle.type_id().to_string(), bundle.version());
        if self.bundles.contains_key(&key) {
            return false;
        }
        self.bundles.insert(key, Arc::new(bundle));
        true
    }

    pub fn type_ids(&self) -> BTreeSet<&str> {
        self.bundles.keys().map(|(t, _)| t.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<DefinitionBundle>> {
        self.bundles.values()
    }
}

impl Definitions for DefinitionSet {
    fn bundle(&self, type_id: &str, version: u32) -> Option<Arc<DefinitionBundle>> {
        self.bundles.get(&(type_id.to_string(), version)).cloned()
    }

    fn latest(&self, type_id: &str) -> Option<Arc<DefinitionBundle>> {
        self.bundles
            .range((type_id.to_string(), 0)..=(type_id.to_string(), u32::MAX))
            .next_back()
            .map(|(_, b)| b.clone())
    }
}
