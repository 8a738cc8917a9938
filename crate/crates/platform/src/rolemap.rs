use std::collections::{BTreeMap, BTreeSet};

use edoc_core::sig::{Purpose, TrustStore};
use edoc_core::time::Timestamp;
use edoc_core::xml::Element;
use edoc_protocol::{codes, AMessage, CommandName};

/// What one role may do.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoleEntry {
    pub name: String,
    pub commands: BTreeSet<String>,
    pub edoc_types: BTreeSet<String>,
}

/// Role key (hex SHA-256 of the role certificate's public key) to
/// privileges. Unknown keys have none.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoleMap {
    pub entries: BTreeMap<String, RoleEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Denial {
    BadSignature(String),
    UnknownRole,
    DeniedCommand,
    DeniedDoctype,
}

impl Denial {
    pub fn code(&self) -> &'static str {
        match self {
            Denial::BadSignature(_) => codes::BAD_SIGNATURE,
            Denial::UnknownRole => codes::UNKNOWN_ROLE,
            Denial::DeniedCommand => codes::DENIED_COMMAND,
            Denial::DeniedDoctype => codes::DENIED_DOCTYPE,
        }
    }

    pub fn detail(&self) -> String {
        match self {
            Denial::BadSignature(d) => d.clone(),
            Denial::UnknownRole => "role is not in the role map".into(),
            Denial::DeniedCommand => "command not allowed for this role".into(),
            Denial::DeniedDoctype => "e-doc type not allowed for this role".into(),
        }
    }
}

impl RoleMap {
    pub fn insert(&mut self, role_key: &str, entry: RoleEntry) {
        self.entries.insert(role_key.to_string(), entry);
    }

    /// Set-membership decision for one (role, command, type) triple.
    pub fn permits(&self, role_key: &str, command: &str, doc_type: Option<&str>) -> Result<(), Denial> {
        let entry = self.entries.get(role_key).ok_or(Denial::UnknownRole)?;
        if !entry.commands.contains(command) {
            return Err(Denial::DeniedCommand);
        }
        let typed = command.parse::<CommandName>().map(CommandName::is_doc_typed).unwrap_or(false);
        if typed {
            match doc_type {
                Some(t) if entry.edoc_types.contains(t) => {}
                _ => return Err(Denial::DeniedDoctype),
            }
        }
        Ok(())
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("rolemap");
        for (key, r) in &self.entries {
            let mut re = Element::new("role").attr("key", key).attr("name", &r.name);
            for c in &r.commands {
                re.push(Element::new("command").attr("name", c));
            }
            for t in &r.edoc_types {
                re.push(Element::new("type").attr("name", t));
            }
            e.push(re);
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, String> {
        if e.name != "rolemap" {
            return Err(format!("expected <rolemap>, found <{}>", e.name));
        }
        let mut map = RoleMap::default();
        for r in e.elements() {
            if r.name != "role" {
                return Err(format!("unexpected <{}> in rolemap", r.name));
            }
            let key = r.get_attr("key").ok_or("role without key")?;
            let mut entry = RoleEntry {
                name: r.get_attr("name").unwrap_or("").to_string(),
                ..Default::default()
            };
            for c in r.elements() {
                let name = c.get_attr("name").ok_or("entry without name")?.to_string();
                match c.name.as_str() {
                    "command" => {
                        name.parse::<CommandName>().map_err(|_| format!("unknown command `{name}`"))?;
                        entry.commands.insert(name)
                    }
                    "type" => entry.edoc_types.insert(name),
                    other => return Err(format!("unexpected <{other}> in role")),
                };
            }
            if map.entries.insert(key.to_string(), entry).is_some() {
                return Err(format!("role key {key} listed twice"));
            }
        }
        Ok(map)
    }
}

/// Signature, role certificate chain and role purpose of a command message.
/// Returns the role key.
pub fn authenticate(msg: &AMessage, role_trust: &TrustStore, at: &Timestamp) -> Result<String, Denial> {
    let report = msg.verify(role_trust, at);
    if !report.primary.signature_valid {
        return Err(Denial::BadSignature("signature does not verify".into()));
    }
    if let Err(e) = &report.primary.chain {
        return Err(Denial::BadSignature(format!("role certificate: {}", e.code())));
    }
    if msg.signature.purpose != Purpose::Role || !msg.signature.signer.has_purpose(Purpose::Role) {
        return Err(Denial::BadSignature("not signed with a role key".into()));
    }
    Ok(msg.signer_key())
}

/// Full authorization of a command message. Checks run in order: signature
/// and role certificate chain, role map membership, command, e-doc type.
/// Returns the role key on success.
pub fn authorize(msg: &AMessage, map: &RoleMap, role_trust: &TrustStore, at: &Timestamp) -> Result<String, Denial> {
    let cmd = msg
        .as_command()
        .ok_or_else(|| Denial::BadSignature("not a command".into()))?;
    let key = authenticate(msg, role_trust, at)?;
    map.permits(&key, &cmd.name, cmd.doc_type.as_deref())?;
    Ok(key)
}
