use std::collections::BTreeMap;

use super::EdocError;
use crate::xml::{check_tree, Element, TypeDef};

enum Target<'a> {
    Text(String),
    Attr(String, &'a str),
}

fn target<'a>(def: &TypeDef, path: &'a str) -> Result<Target<'a>, EdocError> {
    let unknown = || EdocError::UnknownField(path.to_string());
    match path.rsplit_once("/@") {
        Some((element, attr)) => {
            let element = def.absolute(element);
            let spec = def.get(&element).ok_or_else(unknown)?;
            if !spec.attributes.iter().any(|a| a.name == attr) {
                return Err(unknown());
            }
            Ok(Target::Attr(element, attr))
        }
        None => {
            let abs = def.absolute(path);
            match def.get(&abs) {
                Some(spec) if spec.text_allowed => Ok(Target::Text(abs)),
                _ => Err(unknown()),
            }
        }
    }
}

/// Builds content for `def` from field values keyed by element path
/// (`student/id` or `/eEAC/student/id`) or attribute path (`exam/@lang`).
///
/// Each declared path yields at most one element. Optional containers are
/// emitted only when some value lies beneath them.
pub fn assemble(def: &TypeDef, values: &BTreeMap<String, String>) -> Result<Element, EdocError> {
    let mut texts: BTreeMap<String, &str> = BTreeMap::new();
    let mut attrs: BTreeMap<String, Vec<(&str, &str)>> = BTreeMap::new();
    for (path, value) in values {
        match target(def, path)? {
            Target::Text(abs) => {
                let spec = def.get(&abs).unwrap();
                if spec.text_pattern.as_ref().is_some_and(|p| !p.matches(value)) {
                    return Err(EdocError::PatternViolation(abs));
                }
                texts.insert(abs, value);
            }
            Target::Attr(element, name) => {
                let spec = def.get(&element).unwrap();
                let a = spec.attributes.iter().find(|a| a.name == name).unwrap();
                if a.pattern.as_ref().is_some_and(|p| !p.matches(value)) {
                    return Err(EdocError::PatternViolation(format!("{element}/@{name}")));
                }
                attrs.entry(element).or_default().push((name, value));
            }
        }
    }
    for path in def.required_text_paths() {
        if !texts.contains_key(path) {
            return Err(EdocError::MissingField(path.to_string()));
        }
    }

    let root = build(def, &def.root_path(), &texts, &attrs);
    check_tree(&root)?;
    let report = def.validate_structure(&root);
    if !report.is_ok() {
        return Err(EdocError::StructureInvalid(report));
    }
    Ok(root)
}

fn has_value_under(path: &str, texts: &BTreeMap<String, &str>, attrs: &BTreeMap<String, Vec<(&str, &str)>>) -> bool {
    let prefix = format!("{path}/");
    let under = |k: &String| k == path || k.starts_with(&prefix);
    texts.keys().any(under) || attrs.keys().any(under)
}

fn build(
    def: &TypeDef,
    path: &str,
    texts: &BTreeMap<String, &str>,
    attrs: &BTreeMap<String, Vec<(&str, &str)>>,
) -> Element {
    let name = path.rsplit('/').next().unwrap();
    let mut e = Element::new(name);
    for (n, v) in attrs.get(path).into_iter().flatten() {
        e.set_attr(*n, *v);
    }
    if let Some(text) = texts.get(path) {
        e.push_text(*text);
        return e;
    }
    for child in def.children_of(path) {
        let spec = def.get(child).unwrap();
        if spec.required || has_value_under(child, texts, attrs) {
            e.push(build(def, child, texts, attrs));
        }
    }
    e
}
