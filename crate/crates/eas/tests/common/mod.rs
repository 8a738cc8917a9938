#![allow(dead_code)]

use std::sync::Arc;

use edoc_core::sig::SignedDoc;
use edoc_core::time::{self, Timestamp};
use edoc_eas::fixtures::{self, SCENARIO_PORT};
use edoc_eas::identities::{self as id};
use edoc_eas::{login, Desk, Eas, FixturePki};
use edoc_platform::{Clock, FixedClock, Platform, Server};
use edoc_protocol::{Client, Endpoint};
use tempfile::TempDir;

pub const T0: &str = "2026-03-02T08:00:00Z";

pub struct World {
    pub dir: TempDir,
    pub pki: FixturePki,
    pub clock: Arc<FixedClock>,
    pub platform: Arc<Platform>,
    pub server: Arc<Server>,
    pub eas: Eas,
}

impl World {
    pub fn new() -> World {
        let dir = tempfile::tempdir().unwrap();
        let pki = FixturePki::generate();
        let data = dir.path().join("data");
        fixtures::init_data(&data, &pki).unwrap();
        let clock = Arc::new(FixedClock::new(time::parse(T0).unwrap()));
        let platform = Platform::open(&data, pki.signer(id::PLATFORM), clock.clone()).unwrap();
        let server = Server::start(platform.clone()).unwrap();
        let c = clock.clone();
        let eas = Eas::new(
            fixtures::registry(),
            fixtures::usermap(&pki),
            pki.doc_trust(),
            dir.path().join("outbox"),
            Arc::new(move || c.now()),
        );
        World {
            dir,
            pki,
            clock,
            platform,
            server,
            eas,
        }
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn desk_on(&self, port: &str, role: &str, sign: &str) -> Desk {
        let c = self.clock.clone();
        let clock: edoc_protocol::client::Clock = Arc::new(move || c.now());
        let client = Client::new(
            Endpoint::Tcp(self.server.addr(port).unwrap().to_string()),
            self.pki.signer(role),
            self.pki.doc_trust(),
        )
        .with_clock(clock.clone());
        Desk::new(client, self.pki.signer(sign), clock)
    }

    pub fn sso(&self) -> Desk {
        self.desk_on(SCENARIO_PORT, id::SSO_ROLE, id::SSO_SIGN)
    }

    pub fn rossi(&self) -> Desk {
        self.desk_on(SCENARIO_PORT, id::PROFESSOR_ROLE, id::ROSSI_SIGN)
    }

    pub fn admin(&self) -> Desk {
        self.desk_on(edoc_platform::ADMIN_PORT, id::ADMIN_ROLE, id::SSO_SIGN)
    }

    pub fn login(&self, name: &str) -> SignedDoc {
        login(&self.pki.signer(name), self.now()).unwrap()
    }

    pub fn student(&self, sid: &str) -> SignedDoc {
        self.login(&id::student_auth(sid))
    }
}
