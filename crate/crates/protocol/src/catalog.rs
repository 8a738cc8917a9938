use std::fmt;
use std::str::FromStr;

/// The platform's command vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CommandName {
    CreateEdoc,
    StoreEdoc,
    GetEdoc,
    SearchEdocs,
    SetAttribute,
    RevokeEdoc,
    ValidateEdoc,
    CounterSign,
    GetDefinition,
    Acknowledge,
    PutDefinition,
    SetRoleMap,
    PortControl,
    GetLog,
}

impl CommandName {
    pub const ALL: [CommandName; 14] = [
        CommandName::CreateEdoc,
        CommandName::StoreEdoc,
        CommandName::GetEdoc,
        CommandName::SearchEdocs,
        CommandName::SetAttribute,
        CommandName::RevokeEdoc,
        CommandName::ValidateEdoc,
        CommandName::CounterSign,
        CommandName::GetDefinition,
        CommandName::Acknowledge,
        CommandName::PutDefinition,
        CommandName::SetRoleMap,
        CommandName::PortControl,
        CommandName::GetLog,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::CreateEdoc => "CreateEdoc",
            CommandName::StoreEdoc => "StoreEdoc",
            CommandName::GetEdoc => "GetEdoc",
            CommandName::SearchEdocs => "SearchEdocs",
            CommandName::SetAttribute => "SetAttribute",
            CommandName::RevokeEdoc => "RevokeEdoc",
            CommandName::ValidateEdoc => "ValidateEdoc",
            CommandName::CounterSign => "CounterSign",
            CommandName::GetDefinition => "GetDefinition",
            CommandName::Acknowledge => "Acknowledge",
            CommandName::PutDefinition => "PutDefinition",
            CommandName::SetRoleMap => "SetRoleMap",
            CommandName::PortControl => "PortControl",
            CommandName::GetLog => "GetLog",
        }
    }

    /// Commands that operate on one e-doc type and must carry `docType`.
    pub fn is_doc_typed(self) -> bool {
        !matches!(self, CommandName::SetRoleMap | CommandName::PortControl | CommandName::GetLog)
    }

    /// Commands accepted only on the administration port.
    pub fn is_admin(self) -> bool {
        matches!(
            self,
            CommandName::PutDefinition | CommandName::SetRoleMap | CommandName::PortControl | CommandName::GetLog
        )
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommandName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CommandName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Response status codes.
pub mod codes {
    pub const OK: &str = "OK";
    pub const MALFORMED: &str = "MALFORMED";
    pub const SCHEMA_VIOLATION: &str = "SCHEMA_VIOLATION";
    pub const REPLAY_SUSPECT: &str = "REPLAY_SUSPECT";
    pub const REPLAY: &str = "REPLAY";
    pub const BAD_SIGNATURE: &str = "BAD_SIGNATURE";
    pub const UNKNOWN_ROLE: &str = "UNKNOWN_ROLE";
    pub const DENIED_COMMAND: &str = "DENIED_COMMAND";
    pub const DENIED_DOCTYPE: &str = "DENIED_DOCTYPE";
    pub const DENIED_PORT: &str = "DENIED_PORT";
    pub const UNKNOWN_COMMAND: &str = "UNKNOWN_COMMAND";
    pub const UNKNOWN_TYPE: &str = "UNKNOWN_TYPE";
    pub const UNKNOWN_ATTRIBUTE: &str = "UNKNOWN_ATTRIBUTE";
    pub const UNKNOWN_FIELD: &str = "UNKNOWN_FIELD";
    pub const NOT_FOUND: &str = "NOT_FOUND";
    pub const DUPLICATE: &str = "DUPLICATE";
    pub const INVALID_DOC: &str = "INVALID_DOC";
    pub const STATIC_ATTRIBUTE: &str = "STATIC_ATTRIBUTE";
    pub const ILLEGAL_TRANSITION: &str = "ILLEGAL_TRANSITION";
    pub const CONFLICT: &str = "CONFLICT";
    pub const MISSING_FIELD: &str = "MISSING_FIELD";
    pub const PATTERN_VIOLATION: &str = "PATTERN_VIOLATION";
    pub const MANUAL_FIELD_MISSING: &str = "MANUAL_FIELD_MISSING";
    pub const UNEXPECTED_MANUAL_FIELD: &str = "UNEXPECTED_MANUAL_FIELD";
    pub const INPUT_TYPE_MISMATCH: &str = "INPUT_TYPE_MISMATCH";
    pub const VERSION_EXISTS: &str = "VERSION_EXISTS";
    pub const INVALID_DEFINITION: &str = "INVALID_DEFINITION";
    pub const CANNOT_STOP_ADMIN: &str = "CANNOT_STOP_ADMIN";
    pub const UNKNOWN_PORT: &str = "UNKNOWN_PORT";
    pub const INVALID_ARGUMENT: &str = "INVALID_ARGUMENT";
    pub const INTERNAL: &str = "INTERNAL";
}
