use edoc_core::edoc::EdocError;
use edoc_core::sig::SigError;
use edoc_core::wysiwys::WysiwysError;
use edoc_core::xml::{Element, XmlError};
use edoc_eas::EasError;
use edoc_protocol::ClientError;
use thiserror::Error;

/// Failure of a CLI or agent operation. Each variant maps to one exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// The trusted renderer refused the document.
    #[error("{family}: {message}")]
    Refused { family: String, message: String },
    #[error("document is INVALID: {0}")]
    Invalid(String),
    #[error("platform answered {status}: {detail}")]
    Platform { status: String, detail: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("key: {0}")]
    Key(String),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn input(m: impl Into<String>) -> Self {
        CliError::Input(m.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Refused { .. } => 3,
            CliError::Invalid(_) => 4,
            CliError::Platform { .. } => 5,
            CliError::Transport(_) => 6,
            CliError::Key(_) => 7,
            CliError::Input(_) => 8,
        }
    }

    /// Stable family name: the renderer's error family, the platform status
    /// code, or a fixed name for the rest.
    pub fn family(&self) -> String {
        match self {
            CliError::Refused { family, .. } => family.clone(),
            CliError::Invalid(_) => "Invalid".into(),
            CliError::Platform { status, .. } => status.clone(),
            CliError::Transport(_) => "Transport".into(),
            CliError::Key(_) => "Key".into(),
            CliError::Input(_) => "Input".into(),
        }
    }

    pub fn to_xml(&self) -> Element {
        let message = match self {
            CliError::Refused { message, .. } => message.clone(),
            CliError::Platform { detail, .. } => detail.clone(),
            other => other.to_string(),
        };
        Element::with_text("error", message).attr("family", self.family())
    }
}

impl From<WysiwysError> for CliError {
    fn from(e: WysiwysError) -> Self {
        CliError::Refused {
            family: e.family().into(),
            message: e.to_string(),
        }
    }
}

impl From<XmlError> for CliError {
    fn from(e: XmlError) -> Self {
        WysiwysError::Xml(e).into()
    }
}

impl From<EdocError> for CliError {
    fn from(e: EdocError) -> Self {
        match e {
            EdocError::Xml(x) => x.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SigError> for CliError {
    fn from(e: SigError) -> Self {
        CliError::Key(e.to_string())
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        CliError::Transport(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EasError> for CliError {
    fn from(e: EasError) -> Self {
        match e {
            EasError::Platform { status, detail, .. } => CliError::Platform { status, detail },
            EasError::Render(w) => w.into(),
            EasError::Client(c) => c.into(),
            EasError::Sig(s) => s.into(),
            other => CliError::Platform {
                status: other.code(),
                detail: other.to_string(),
            },
        }
    }
}
