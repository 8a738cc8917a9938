use std::collections::BTreeMap;

use edoc_core::xml::Element;

/// Maps authentication key ids to organisation user ids (`usermap.xml`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UserMap {
    pub users: BTreeMap<String, String>,
}

impl UserMap {
    pub fn lookup(&self, key_id: &str) -> Option<&str> {
        self.users.get(key_id).map(String::as_str)
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("usermap");
        for (k, v) in &self.users {
            e.push(Element::new("user").attr("key", k).attr("orgId", v));
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, String> {
        if e.name != "usermap" {
            return Err("expected <usermap>".into());
        }
        let mut m = UserMap::default();
        for u in e.elements_named("user") {
            m.users.insert(
                u.get_attr("key").ok_or("user without key")?.to_string(),
                u.get_attr("orgId").ok_or("user without orgId")?.to_string(),
            );
        }
        Ok(m)
    }
}
