use std::collections::{BTreeMap, BTreeSet};

use super::EdocError;
use crate::xml::Element;

/// Name of the dynamic attribute that holds the lifecycle status.
pub const STATUS: &str = "status";

/// Allowed status transitions. Self-loops and cycles are rejected.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransitionTable {
    edges: BTreeSet<(String, String)>,
}

impl TransitionTable {
    pub fn new<I, S>(edges: I) -> Result<Self, EdocError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let edges: BTreeSet<(String, String)> =
            edges.into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        if let Some((a, _)) = edges.iter().find(|(a, b)| a == b) {
            return Err(EdocError::Definition(format!("self-loop on `{a}`")));
        }
        let table = TransitionTable { edges };
        if table.has_cycle() {
            return Err(EdocError::Definition("transition table has a cycle".into()));
        }
        Ok(table)
    }

    pub fn allows(&self, from: &str, to: &str) -> bool {
        self.edges.contains(&(from.to_string(), to.to_string()))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn states(&self) -> BTreeSet<&str> {
        self.edges().flat_map(|(a, b)| [a, b]).collect()
    }

    fn has_cycle(&self) -> bool {
        // Kahn's algorithm: a DAG drains completely.
        let mut indegree: BTreeMap<&str, usize> = self.states().into_iter().map(|s| (s, 0)).collect();
        for (_, b) in self.edges() {
            *indegree.get_mut(b).unwrap() += 1;
        }
        let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(s, _)| *s).collect();
        let mut drained = 0;
        while let Some(s) = ready.pop() {
            drained += 1;
            for (_, b) in self.edges().filter(|(a, _)| *a == s) {
                let d = indegree.get_mut(b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(b);
                }
            }
        }
        drained != indegree.len()
    }
}

/// Per-document attributes. Static values are fixed when the platform
/// starts; dynamic values change at runtime and always include `status`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AttributeSet {
    pub static_attrs: BTreeMap<String, String>,
    pub dynamic: BTreeMap<String, String>,
}

impl AttributeSet {
    pub fn status(&self) -> Option<&str> {
        self.dynamic.get(STATUS).map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.dynamic
            .get(name)
            .or_else(|| self.static_attrs.get(name))
            .map(String::as_str)
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("attrs");
        for (k, v) in &self.static_attrs {
            e.push(Element::with_text("static", v).attr("name", k));
        }
        for (k, v) in &self.dynamic {
            e.push(Element::with_text("dynamic", v).attr("name", k));
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, EdocError> {
        if e.name != "attrs" {
            return Err(EdocError::Malformed("expected <attrs>".into()));
        }
        let mut set = AttributeSet::default();
        for a in e.elements() {
            let name = a
                .get_attr("name")
                .ok_or_else(|| EdocError::Malformed("attribute without name".into()))?
                .to_string();
            match a.name.as_str() {
                "static" => set.static_attrs.insert(name, a.text()),
                "dynamic" => set.dynamic.insert(name, a.text()),
                other => return Err(EdocError::Malformed(format!("unexpected <{other}>"))),
            };
        }
        Ok(set)
    }
}

/// Moves `status` to `to` if the table has that edge; everything else is
/// left untouched.
pub fn transition_status(
    attrs: &AttributeSet,
    to: &str,
    table: &TransitionTable,
) -> Result<AttributeSet, EdocError> {
    let from = attrs.status().unwrap_or("");
    if !table.allows(from, to) {
        return Err(EdocError::IllegalTransition {
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    let mut next = attrs.clone();
    next.dynamic.insert(STATUS.to_string(), to.to_string());
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eac_table() -> TransitionTable {
        TransitionTable::new([("pending", "processed"), ("pending", "revoked")]).unwrap()
    }

    fn with_status(s: &str) -> AttributeSet {
        let mut a = AttributeSet::default();
        a.static_attrs.insert("partition".into(), "input".into());
        a.dynamic.insert(STATUS.into(), s.into());
        a.dynamic.insert("note".into(), "x".into());
        a
    }

    #[test]
    fn allowed_and_illegal_transitions() {
        let t = eac_table();
        let next = transition_status(&with_status("pending"), "processed", &t).unwrap();
        assert_eq!(next.status(), Some("processed"));
        assert_eq!(next.static_attrs, with_status("pending").static_attrs);
        assert_eq!(next.dynamic.get("note").map(String::as_str), Some("x"));
        assert_eq!(
            transition_status(&next, "pending", &t),
            Err(EdocError::IllegalTransition {
                from: "processed".into(),
                to: "pending".into()
            })
        );
        assert!(transition_status(&with_status("pending"), "revoked", &t).is_ok());
    }

    #[test]
    fn rejects_loops_and_cycles() {
        assert!(TransitionTable::new([("a", "a")]).is_err());
        assert!(TransitionTable::new([("a", "b"), ("b", "c"), ("c", "a")]).is_err());
        assert!(TransitionTable::new([("a", "b"), ("b", "c"), ("a", "c")]).is_ok());
    }

    #[test]
    fn attrs_xml_round_trip() {
        let a = with_status("pending");
        assert_eq!(AttributeSet::from_xml(&a.to_xml()).unwrap(), a);
    }
}
