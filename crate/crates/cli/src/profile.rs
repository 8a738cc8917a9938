//! Identity and endpoint settings shared by the networked commands.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use edoc_core::sig::{keystore, MiniCert, Signer, TrustStore};
use edoc_core::time;
use edoc_core::xml::{parse, Element};
use edoc_eas::Desk;
use edoc_protocol::{Client, Endpoint};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Args)]
pub struct ProfileArgs {
    /// Profile file: `<profile endpoint roleKey roleCert signKey signCert trust/>`,
    /// paths relative to the file. Flags override its entries.
    #[arg(long, env = "EDOC_PROFILE", global = true)]
    pub profile: Option<PathBuf>,
    /// Platform port as host:port, or a gateway tunnel URL.
    #[arg(long, env = "EDOC_ENDPOINT", global = true)]
    pub endpoint: Option<String>,
    /// Key store of the role key that signs commands.
    #[arg(long, global = true)]
    pub role_key: Option<PathBuf>,
    #[arg(long, global = true)]
    pub role_cert: Option<PathBuf>,
    #[arg(long, env = "EDOC_ROLE_PASS", hide_env_values = true, global = true)]
    pub role_pass: Option<String>,
    /// Key store of the personal signing key.
    #[arg(long, global = true)]
    pub sign_key: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sign_cert: Option<PathBuf>,
    #[arg(long, env = "EDOC_SIGN_PASS", hide_env_values = true, global = true)]
    pub sign_pass: Option<String>,
    /// Trust store for documents and platform responses.
    #[arg(long, env = "EDOC_TRUST", global = true)]
    pub trust: Option<PathBuf>,
}

/// Resolved profile.
#[derive(Debug, Clone, Default)]
pub struct Profile {
    pub endpoint: Option<String>,
    pub role_key: Option<PathBuf>,
    pub role_cert: Option<PathBuf>,
    pub role_pass: Option<String>,
    pub sign_key: Option<PathBuf>,
    pub sign_cert: Option<PathBuf>,
    pub sign_pass: Option<String>,
    pub trust: Option<PathBuf>,
}

pub fn read_xml(path: &Path) -> Result<Element, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(parse(&bytes)?)
}

fn load_signer(key: &Option<PathBuf>, cert: &Option<PathBuf>, pass: &Option<String>, what: &str) -> Result<Signer, CliError> {
    let (Some(key), Some(cert)) = (key, cert) else {
        return Err(CliError::input(format!("{what} key store and certificate are required")));
    };
    let pass = pass
        .as_deref()
        .ok_or_else(|| CliError::Key(format!("no passphrase for the {what} key")))?;
    let sealed = fs::read(key).map_err(|e| CliError::input(format!("{}: {e}", key.display())))?;
    let key = keystore::open(&sealed, pass)?;
    let cert = MiniCert::from_xml(&read_xml(cert)?)?;
    Ok(Signer::new(key, cert)?)
}

impl Profile {
    pub fn resolve(args: &ProfileArgs) -> Result<Profile, CliError> {
        let mut p = Profile::default();
        if let Some(file) = &args.profile {
            let e = read_xml(file)?;
            if e.name != "profile" {
                return Err(CliError::input("profile file must have a <profile> root"));
            }
            let base = file.parent().unwrap_or(Path::new("."));
            let path = |n: &str| e.get_attr(n).map(|v| base.join(v));
            p.endpoint = e.get_attr("endpoint").map(str::to_string);
            p.role_key = path("roleKey");
            p.role_cert = path("roleCert");
            p.sign_key = path("signKey");
            p.sign_cert = path("signCert");
            p.trust = path("trust");
        }
        macro_rules! over {
            ($f:ident) => {
                if args.$f.is_some() {
                    p.$f = args.$f.clone();
                }
            };
        }
        over!(endpoint);
        over!(role_key);
        over!(role_cert);
        over!(role_pass);
        over!(sign_key);
        over!(sign_cert);
        over!(sign_pass);
        over!(trust);
        if let Some(ep) = &p.endpoint {
            Endpoint::parse(ep).map_err(CliError::Input)?;
        }
        Ok(p)
    }

    pub fn trust_store(&self) -> Result<TrustStore, CliError> {
        let path = self.trust.as_ref().ok_or_else(|| CliError::input("--trust is required"))?;
        Ok(TrustStore::from_xml(&read_xml(path)?)?)
    }

    pub fn role_signer(&self) -> Result<Signer, CliError> {
        load_signer(&self.role_key, &self.role_cert, &self.role_pass, "role")
    }

    pub fn sign_signer(&self) -> Result<Signer, CliError> {
        load_signer(&self.sign_key, &self.sign_cert, &self.sign_pass, "signing")
    }

    pub fn client(&self) -> Result<Client, CliError> {
        let ep = self.endpoint.as_deref().ok_or_else(|| CliError::input("--endpoint is required"))?;
        Ok(Client::new(Endpoint::parse(ep).map_err(CliError::Input)?, self.role_signer()?, self.trust_store()?))
    }

    /// Client plus signing key, for commands that sign and submit.
    pub fn desk(&self) -> Result<Desk, CliError> {
        Ok(Desk::new(self.client()?, self.sign_signer()?, Arc::new(time::now)))
    }
}
