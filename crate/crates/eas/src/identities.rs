//! Fixture PKI. Keys are derived from fixed seeds and certificates carry
//! fixed dates, so the whole set regenerates bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use edoc_core::digest::DigestAlg;
use edoc_core::sig::{
    issue_cert, keystore, self_signed, CertTemplate, MiniCert, PrivateKey, Purpose, SigAlg, Signer, TrustStore,
};
use edoc_core::time::{self, Timestamp};
use edoc_core::xml::{a_canon, parse};

use crate::EasError;

pub const NOT_BEFORE: &str = "2025-01-01T00:00:00Z";
pub const NOT_AFTER: &str = "2035-01-01T00:00:00Z";

pub const ROOT: &str = "root";
pub const ROLE_CA: &str = "role-ca";
pub const PLATFORM: &str = "platform";
pub const SSO_SIGN: &str = "sso-sign";
pub const SSO_ROLE: &str = "sso-role";
pub const ADMIN_ROLE: &str = "admin-role";
pub const PROFESSOR_ROLE: &str = "professor-role";
pub const AUDITOR_ROLE: &str = "auditor-role";
pub const ROSSI_SIGN: &str = "rossi-sign";
pub const ROSSI_AUTH: &str = "rossi-auth";
pub const BIANCHI_SIGN: &str = "bianchi-sign";
pub const BIANCHI_AUTH: &str = "bianchi-auth";

/// Fixture students; each has an authentication key `<id>-auth`.
pub const STUDENTS: [&str; 6] = ["s100001", "s100002", "s100003", "s100004", "s100005", "s100006"];

pub struct IdentitySpec {
    pub name: String,
    pub subject: String,
    pub purpose: Purpose,
    /// `None` for self-signed anchors.
    pub issuer: Option<&'static str>,
}

fn spec(name: &str, subject: &str, purpose: Purpose, issuer: Option<&'static str>) -> IdentitySpec {
    IdentitySpec {
        name: name.into(),
        subject: subject.into(),
        purpose,
        issuer,
    }
}

/// Every fixture identity in issuing order.
pub fn specs() -> Vec<IdentitySpec> {
    let mut v = vec![
        spec(ROOT, "ESP Root CA", Purpose::Issuer, None),
        spec(ROLE_CA, "ESP Role Authority", Purpose::Issuer, None),
        spec(PLATFORM, "ESP Platform", Purpose::Platform, Some(ROOT)),
        spec(SSO_SIGN, "Student Secretariat Office", Purpose::Sign, Some(ROOT)),
        spec(SSO_ROLE, "role: student office", Purpose::Role, Some(ROLE_CA)),
        spec(ADMIN_ROLE, "role: administrator", Purpose::Role, Some(ROLE_CA)),
        spec(PROFESSOR_ROLE, "role: professor", Purpose::Role, Some(ROLE_CA)),
        spec(AUDITOR_ROLE, "role: auditor", Purpose::Role, Some(ROLE_CA)),
        spec(ROSSI_SIGN, "Prof. Elena Rossi", Purpose::Sign, Some(ROOT)),
        spec(ROSSI_AUTH, "Prof. Elena Rossi", Purpose::Auth, Some(ROOT)),
        spec(BIANCHI_SIGN, "Prof. Marco Bianchi", Purpose::Sign, Some(ROOT)),
        spec(BIANCHI_AUTH, "Prof. Marco Bianchi", Purpose::Auth, Some(ROOT)),
    ];
    for s in STUDENTS {
        v.push(spec(&student_auth(s), &format!("Student {s}"), Purpose::Auth, Some(ROOT)));
    }
    v
}

pub fn student_auth(student_id: &str) -> String {
    format!("{student_id}-auth")
}

/// Demo passphrase of a fixture key store.
pub fn passphrase(name: &str) -> String {
    format!("demo-{name}")
}

pub fn seed_key(name: &str) -> PrivateKey {
    let d = DigestAlg::Sha256.digest(format!("eas fixture key\n{name}").as_bytes());
    PrivateKey::from_seed(SigAlg::Ed25519, d.try_into().expect("32-byte digest"))
}

fn ts(s: &str) -> Timestamp {
    time::parse(s).expect("fixed timestamp")
}

/// Keys and certificates of all fixture identities.
pub struct FixturePki {
    pub certs: BTreeMap<String, MiniCert>,
    pub keys: BTreeMap<String, PrivateKey>,
}

impl FixturePki {
    pub fn generate() -> FixturePki {
        let (nb, na) = (ts(NOT_BEFORE), ts(NOT_AFTER));
        let mut certs: BTreeMap<String, MiniCert> = BTreeMap::new();
        let mut keys = BTreeMap::new();
        for (i, s) in specs().into_iter().enumerate() {
            let key = seed_key(&s.name);
            let tpl = CertTemplate::new(&s.subject, key.public_key(), [s.purpose], nb, na, i as u64 + 1);
            let cert = match s.issuer {
                None => self_signed(tpl, &key),
                Some(iss) => issue_cert(tpl, &keys[iss], &certs[iss], &nb),
            }
            .expect("fixture certificate");
            certs.insert(s.name.clone(), cert);
            keys.insert(s.name, key);
        }
        FixturePki { certs, keys }
    }

    /// Loads certificates from `dir/certs` and keys from `dir/keys`,
    /// opening each key store with its demo passphrase.
    pub fn load(dir: &Path) -> Result<FixturePki, EasError> {
        let mut certs = BTreeMap::new();
        let mut keys = BTreeMap::new();
        for s in specs() {
            let cert_path = dir.join("certs").join(format!("{}.xml", s.name));
            let bytes = fs::read(&cert_path).map_err(|e| EasError::Fixture(format!("{}: {e}", cert_path.display())))?;
            let cert = MiniCert::from_xml(&parse(&bytes).map_err(|e| EasError::Fixture(e.to_string()))?)?;
            let key_path = dir.join("keys").join(format!("{}.key", s.name));
            let sealed = fs::read(&key_path).map_err(|e| EasError::Fixture(format!("{}: {e}", key_path.display())))?;
            keys.insert(s.name.clone(), keystore::open(&sealed, &passphrase(&s.name))?);
            certs.insert(s.name, cert);
        }
        Ok(FixturePki { certs, keys })
    }

    pub fn signer(&self, name: &str) -> Signer {
        Signer::new(self.keys[name].clone(), self.certs[name].clone()).expect("matching fixture key")
    }

    pub fn cert(&self, name: &str) -> &MiniCert {
        &self.certs[name]
    }

    /// Anchors for document, receipt and response signatures.
    pub fn doc_trust(&self) -> TrustStore {
        let mut t = TrustStore::new();
        t.add_anchor(self.certs[ROOT].clone()).expect("self-signed root");
        t
    }

    /// Anchors for role certificates.
    pub fn role_trust(&self) -> TrustStore {
        let mut t = TrustStore::new();
        t.add_anchor(self.certs[ROLE_CA].clone()).expect("self-signed role CA");
        t
    }

    pub fn cert_bytes(&self, name: &str) -> Vec<u8> {
        a_canon(&self.certs[name].to_xml())
    }
}
