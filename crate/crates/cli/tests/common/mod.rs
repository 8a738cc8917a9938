#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use edoc_core::time;
use edoc_core::xml::{parse, Element};
use edoc_eas::fixtures::{self, SCENARIO_PORT};
use edoc_eas::identities as id;
use edoc_eas::{login, Desk, Eas, FixturePki};
use edoc_platform::{Platform, Server, SystemClock};
use edoc_protocol::{Client, Endpoint};
use tempfile::TempDir;

pub fn fixture(rel: &str) -> PathBuf {
    fixtures::fixture_dir().join(rel)
}

pub fn key(name: &str) -> PathBuf {
    fixture(&format!("keys/{name}.key"))
}

pub fn cert(name: &str) -> PathBuf {
    fixture(&format!("certs/{name}.xml"))
}

/// A platform on the system clock, initialised from the fixture PKI, with
/// the examination office on top.
pub struct Net {
    pub dir: TempDir,
    pub pki: FixturePki,
    pub platform: Arc<Platform>,
    pub server: Arc<Server>,
    pub eas: Eas,
}

impl Net {
    pub fn new() -> Net {
        let dir = tempfile::tempdir().unwrap();
        let pki = FixturePki::generate();
        let data = dir.path().join("data");
        fixtures::init_data(&data, &pki).unwrap();
        let platform = Platform::open(&data, pki.signer(id::PLATFORM), Arc::new(SystemClock)).unwrap();
        let server = Server::start(platform.clone()).unwrap();
        let eas = Eas::new(
            fixtures::registry(),
            fixtures::usermap(&pki),
            pki.doc_trust(),
            dir.path().join("outbox"),
            Arc::new(time::now),
        );
        Net {
            dir,
            pki,
            platform,
            server,
            eas,
        }
    }

    pub fn endpoint(&self, port: &str) -> String {
        self.server.addr(port).unwrap().to_string()
    }

    pub fn client(&self, port: &str, role: &str) -> Client {
        Client::new(Endpoint::Tcp(self.endpoint(port)), self.pki.signer(role), self.pki.doc_trust())
    }

    pub fn desk(&self, port: &str, role: &str, sign: &str) -> Desk {
        Desk::new(self.client(port, role), self.pki.signer(sign), Arc::new(time::now))
    }

    pub fn sso(&self) -> Desk {
        self.desk(SCENARIO_PORT, id::SSO_ROLE, id::SSO_SIGN)
    }

    /// Pending admission cards for the given students on one exam.
    pub fn admit(&self, students: &[&str], exam: &str) -> Vec<String> {
        let mut sso = self.sso();
        students
            .iter()
            .map(|s| {
                let l = login(&self.pki.signer(&id::student_auth(s)), time::now()).unwrap();
                self.eas.request_admission(&mut sso, &l, exam).unwrap().doc_id
            })
            .collect()
    }
}

pub fn xml(bytes: &[u8]) -> Element {
    parse(bytes).unwrap_or_else(|e| panic!("not XML ({e}): {}", String::from_utf8_lossy(bytes)))
}
