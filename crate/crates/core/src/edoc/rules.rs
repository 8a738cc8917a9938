use std::collections::{BTreeMap, BTreeSet};

use super::{assemble, EDoc, EdocError};
use crate::xml::{Element, TypeDef};

/// A field the referent fills in by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManualField {
    pub to: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    Copy { from: String, to: String },
    Const { to: String, value: String },
    Manual(ManualField),
}

impl Rule {
    pub fn target(&self) -> &str {
        match self {
            Rule::Copy { to, .. } | Rule::Const { to, .. } => to,
            Rule::Manual(m) => &m.to,
        }
    }
}

/// Declarative derivation of one output document from one input document.
/// All paths are absolute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessingRules {
    pub input_type: String,
    pub output_type: String,
    pub rules: Vec<Rule>,
}

impl ProcessingRules {
    pub fn manual_fields(&self) -> impl Iterator<Item = &ManualField> {
        self.rules.iter().filter_map(|r| match r {
            Rule::Manual(m) => Some(m),
            _ => None,
        })
    }

    /// Checks targets against the output definition: every target is a
    /// declared text path, no path is targeted twice and every required
    /// text path is targeted.
    pub fn check_output(&self, output: &TypeDef) -> Result<(), EdocError> {
        if output.type_id != self.output_type {
            return Err(EdocError::Definition(format!(
                "rules produce {}, definition is {}",
                self.output_type, output.type_id
            )));
        }
        let mut seen = BTreeSet::new();
        for r in &self.rules {
            let to = r.target();
            if !output.get(to).is_some_and(|s| s.text_allowed) {
                return Err(EdocError::Definition(format!("rule target {to} is not a text field")));
            }
            if !seen.insert(to) {
                return Err(EdocError::Definition(format!("{to} is targeted by more than one rule")));
            }
            if let Rule::Manual(m) = r {
                if m.label.trim().is_empty() {
                    return Err(EdocError::Definition(format!("manual field {to} has no label")));
                }
            }
        }
        for p in output.required_text_paths() {
            if !seen.contains(p) {
                return Err(EdocError::Definition(format!("required field {p} is not covered")));
            }
        }
        Ok(())
    }

    /// Checks that every copy source is a text path of the input definition.
    pub fn check_input(&self, input: &TypeDef) -> Result<(), EdocError> {
        if input.type_id != self.input_type {
            return Err(EdocError::Definition(format!(
                "rules consume {}, definition is {}",
                self.input_type, input.type_id
            )));
        }
        for r in &self.rules {
            if let Rule::Copy { from, .. } = r {
                if !input.get(from).is_some_and(|s| s.text_allowed) {
                    return Err(EdocError::Definition(format!("copy source {from} is not a text field")));
                }
            }
        }
        Ok(())
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("rules")
            .attr("inputType", &self.input_type)
            .attr("outputType", &self.output_type);
        for r in &self.rules {
            e.push(match r {
                Rule::Copy { from, to } => Element::new("copy").attr("from", from).attr("to", to),
                Rule::Const { to, value } => Element::new("const").attr("to", to).attr("value", value),
                Rule::Manual(m) => Element::new("manual").attr("to", &m.to).attr("label", &m.label),
            });
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, EdocError> {
        let bad = |m: String| EdocError::Definition(m);
        if e.name != "rules" {
            return Err(bad(format!("expected <rules>, found <{}>", e.name)));
        }
        let attr = |el: &Element, name: &str| {
            el.get_attr(name)
                .map(str::to_string)
                .ok_or_else(|| bad(format!("<{}> lacks `{name}`", el.name)))
        };
        let mut rules = Vec::new();
        for r in e.elements() {
            rules.push(match r.name.as_str() {
                "copy" => Rule::Copy {
                    from: attr(r, "from")?,
                    to: attr(r, "to")?,
                },
                "const" => Rule::Const {
                    to: attr(r, "to")?,
                    value: attr(r, "value")?,
                },
                "manual" => Rule::Manual(ManualField {
                    to: attr(r, "to")?,
                    label: attr(r, "label")?,
                }),
                other => return Err(bad(format!("unknown rule <{other}>"))),
            });
        }
        Ok(ProcessingRules {
            input_type: attr(e, "inputType")?,
            output_type: attr(e, "outputType")?,
            rules,
        })
    }
}

/// Derives draft output content from `input`.
///
/// `manual` must hold exactly the manual targets. Optional copy sources
/// that are absent in the input are skipped.
pub fn apply_rules(
    rules: &ProcessingRules,
    output: &TypeDef,
    input: &EDoc,
    manual: &BTreeMap<String, String>,
) -> Result<Element, EdocError> {
    if input.header.type_id != rules.input_type {
        return Err(EdocError::InputTypeMismatch {
            expected: rules.input_type.clone(),
            found: input.header.type_id.clone(),
        });
    }
    rules.check_output(output)?;
    for key in manual.keys() {
        let abs = output.absolute(key);
        if !rules.manual_fields().any(|m| m.to == abs) {
            return Err(EdocError::UnexpectedManualField(key.clone()));
        }
    }
    let manual: BTreeMap<String, &String> = manual.iter().map(|(k, v)| (output.absolute(k), v)).collect();

    let mut values = BTreeMap::new();
    for r in &rules.rules {
        match r {
            Rule::Copy { from, to } => {
                if let Some(v) = input.content().select_text(from) {
                    values.insert(to.clone(), v);
                }
            }
            Rule::Const { to, value } => {
                values.insert(to.clone(), value.clone());
            }
            Rule::Manual(m) => match manual.get(&m.to) {
                Some(v) if !v.is_empty() => {
                    values.insert(m.to.clone(), (*v).clone());
                }
                _ => return Err(EdocError::ManualFieldMissing(m.label.clone())),
            },
        }
    }
    assemble(output, &values)
}
